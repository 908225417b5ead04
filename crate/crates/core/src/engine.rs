//! Immersions as 2-jet providers, orthonormal frames and the second
//! fundamental form.
//!
//! A sphere ambient `S^N(R)` is handled extrinsically: jets live in
//! `R^{N+1}`, the normal frame is taken orthogonal to the position vector, and
//! the radial component of the second derivatives (which is `-<e_i,e_j>/R`
//! times the outward radial unit) is discarded from the second fundamental
//! form.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::multijet::MultiJet;
use crate::{Error, Result};

/// Relative singular-value threshold below which `d1` is treated as rank
/// deficient.
pub const RANK_TOL: f64 = 1e-8;
/// Relative singular-value threshold for relative nullity and first normal
/// space dimension.
pub const NULLITY_TOL: f64 = 1e-8;
/// Allowed deviation of a spherical jet from the sphere.
pub const SPHERE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AmbientSpace {
    /// `R^dim`.
    Euclidean { dim: usize },
    /// The sphere of the given radius in `R^{dim+1}`.
    Sphere { dim: usize, radius: f64 },
}

impl AmbientSpace {
    pub fn euclidean(dim: usize) -> Self {
        AmbientSpace::Euclidean { dim }
    }

    pub fn unit_sphere(dim: usize) -> Self {
        AmbientSpace::Sphere { dim, radius: 1.0 }
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("sphere radius must be positive, got {radius}")));
        }
        Ok(AmbientSpace::Sphere { dim, radius })
    }

    /// Dimension of the ambient manifold.
    pub fn dim(&self) -> usize {
        match *self {
            AmbientSpace::Euclidean { dim } | AmbientSpace::Sphere { dim, .. } => dim,
        }
    }

    /// Length of position vectors.
    pub fn vector_dim(&self) -> usize {
        match *self {
            AmbientSpace::Euclidean { dim } => dim,
            AmbientSpace::Sphere { dim, .. } => dim + 1,
        }
    }

    /// The flag `c` in `{0, 1}`.
    pub fn curvature_flag(&self) -> u8 {
        match self {
            AmbientSpace::Euclidean { .. } => 0,
            AmbientSpace::Sphere { .. } => 1,
        }
    }

    /// Sectional curvature of the ambient space, `1/R^2` for a sphere.
    pub fn curvature(&self) -> f64 {
        match *self {
            AmbientSpace::Euclidean { .. } => 0.0,
            AmbientSpace::Sphere { radius, .. } => 1.0 / (radius * radius),
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            AmbientSpace::Euclidean { .. } => None,
            AmbientSpace::Sphere { radius, .. } => Some(radius),
        }
    }
}

/// Index of the pair `(i, j)`, `i <= j`, in lexicographic upper-triangular
/// order.
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Position, first and second partial derivatives of an immersion at one
/// parameter point. Second derivatives are stored once per unordered pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    n: usize,
    dim: usize,
    position: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Jet2 {
    /// `d1` is row-major `n x dim`; `d2` is `n(n+1)/2` rows of length `dim`
    /// in lexicographic `(i <= j)` order.
    pub fn new(n: usize, position: Vec<f64>, d1: Vec<f64>, d2: Vec<f64>) -> Result<Self> {
        let dim = position.len();
        if n == 0 || d1.len() != n * dim || d2.len() != n * (n + 1) / 2 * dim {
            return Err(Error::Dimension(format!(
                "jet with n={n}, dim={dim}: d1 has {} entries, d2 has {}",
                d1.len(),
                d2.len()
            )));
        }
        if position.iter().chain(&d1).chain(&d2).any(|v| !v.is_finite()) {
            return Err(Error::Dimension("jet contains non-finite values".into()));
        }
        Ok(Self { n, dim, position, d1, d2 })
    }

    /// Collect the jets of the coordinate functions of an immersion.
    pub fn from_multijet(coords: &[MultiJet]) -> Result<Self> {
        let n = coords.first().map(MultiJet::dim).unwrap_or(0);
        let dim = coords.len();
        let position = coords.iter().map(|c| c.value).collect();
        let mut d1 = vec![0.0; n * dim];
        let mut d2 = vec![0.0; n * (n + 1) / 2 * dim];
        for (k, c) in coords.iter().enumerate() {
            for i in 0..n {
                d1[i * dim + k] = c.grad[i];
                for j in i..n {
                    d2[pair_index(n, i, j) * dim + k] = c.second(i, j);
                }
            }
        }
        Self::new(n, position, d1, d2)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn first(&self, i: usize) -> &[f64] {
        &self.d1[i * self.dim..(i + 1) * self.dim]
    }

    pub fn second(&self, i: usize, j: usize) -> &[f64] {
        let p = pair_index(self.n, i, j);
        &self.d2[p * self.dim..(p + 1) * self.dim]
    }

    pub fn raw_first(&self) -> &[f64] {
        &self.d1
    }

    pub fn raw_second(&self) -> &[f64] {
        &self.d2
    }

    /// Largest absolute difference to another jet of the same shape.
    pub fn max_abs_diff(&self, other: &Jet2) -> f64 {
        self.position
            .iter()
            .zip(&other.position)
            .chain(self.d1.iter().zip(&other.d1))
            .chain(self.d2.iter().zip(&other.d2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coord {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Coord {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    pub fn circle() -> Self {
        Self { lo: 0.0, hi: std::f64::consts::TAU, periodic: true }
    }
}

/// Parameter domain: a box, some of whose sides are circles. Periodicity is
/// metadata only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub coords: Vec<Coord>,
}

impl ParamDomain {
    pub fn new(coords: Vec<Coord>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Uniform random points, reproducible for a given seed.
    pub fn random_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.coords.iter().map(|c| rng.gen_range(c.lo..c.hi)).collect())
            .collect()
    }

    /// Regular grid with `per_dim` points per coordinate. Periodic
    /// coordinates skip the duplicated endpoint; intervals use cell centres.
    pub fn grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .coords
            .iter()
            .map(|c| {
                (0..per_dim)
                    .map(|k| {
                        let t = if c.periodic { k as f64 / per_dim as f64 } else { (k as f64 + 0.5) / per_dim as f64 };
                        c.lo + t * (c.hi - c.lo)
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

type JetFn = dyn Fn(&[f64]) -> Result<Jet2> + Send + Sync;

/// An immersion given by a 2-jet provider on a parameter domain.
#[derive(Clone)]
pub struct Chart {
    name: String,
    n: usize,
    ambient: AmbientSpace,
    domain: ParamDomain,
    provider: Arc<JetFn>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("ambient", &self.ambient)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        ambient: AmbientSpace,
        domain: ParamDomain,
        provider: impl Fn(&[f64]) -> Result<Jet2> + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = domain.dim();
        if n == 0 || n >= ambient.dim() + 1 {
            return Err(Error::Dimension(format!("chart of dimension {n} in ambient of dimension {}", ambient.dim())));
        }
        Ok(Self { name: name.into(), n, ambient, domain, provider: Arc::new(provider) })
    }

    /// Chart whose coordinates are written with [`MultiJet`] arithmetic.
    pub fn from_multijet(
        name: impl Into<String>,
        ambient: AmbientSpace,
        domain: ParamDomain,
        f: impl Fn(&[MultiJet]) -> Result<Vec<MultiJet>> + Send + Sync + 'static,
    ) -> Result<Self> {
        let n = domain.dim();
        let vector_dim = ambient.vector_dim();
        Self::new(name, ambient, domain, move |u: &[f64]| {
            if u.len() != n {
                return Err(Error::Dimension(format!("expected {n} parameters, got {}", u.len())));
            }
            let coords = f(&MultiJet::variables(u))?;
            if coords.len() != vector_dim {
                return Err(Error::Dimension(format!("model produced {} coordinates, expected {vector_dim}", coords.len())));
            }
            Jet2::from_multijet(&coords)
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ambient(&self) -> &AmbientSpace {
        &self.ambient
    }

    pub fn domain(&self) -> &ParamDomain {
        &self.domain
    }

    /// Codimension inside the ambient space.
    pub fn codim(&self) -> usize {
        self.ambient.dim() - self.n
    }

    pub fn jet(&self, u: &[f64]) -> Result<Jet2> {
        (self.provider)(u)
    }

    pub fn position(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(u)?.position)
    }
}

/// Orthonormal tangent and normal frames at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FramedPoint {
    /// Columns are the tangent frame vectors `e_a` in ambient coordinates.
    pub tangent: DMatrix<f64>,
    /// Columns are the normal frame vectors `xi_a`.
    pub normal: DMatrix<f64>,
    /// Column `a` holds the parameter-basis coefficients of `e_a`.
    pub coords: DMatrix<f64>,
    /// Outward radial unit vector for a sphere ambient.
    pub radial: Option<DVector<f64>>,
}

impl FramedPoint {
    pub fn n(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn m(&self) -> usize {
        self.normal.ncols()
    }

    /// `max |G - I|` for the Gram matrix of tangent, normal and radial
    /// vectors together.
    pub fn gram_residual(&self) -> f64 {
        let mut cols: Vec<DVector<f64>> = self.tangent.column_iter().map(|c| c.into_owned()).collect();
        cols.extend(self.normal.column_iter().map(|c| c.into_owned()));
        cols.extend(self.radial.iter().cloned());
        let k = cols.len();
        let mut r: f64 = 0.0;
        for a in 0..k {
            for b in 0..k {
                let target = if a == b { 1.0 } else { 0.0 };
                r = r.max((cols[a].dot(&cols[b]) - target).abs());
            }
        }
        r
    }
}

fn check_sphere_jet(ambient: &AmbientSpace, jet: &Jet2) -> Result<Option<DVector<f64>>> {
    let Some(radius) = ambient.radius() else { return Ok(None) };
    let x = DVector::from_column_slice(jet.position());
    let r2 = radius * radius;
    let dev = (x.norm_squared() - r2).abs();
    if dev > SPHERE_TOL * r2.max(1.0) {
        return Err(Error::OffSphere(format!("|x|^2 - R^2 = {dev:.3e}")));
    }
    for i in 0..jet.n() {
        let d = DVector::from_column_slice(jet.first(i));
        let ip = d.dot(&x).abs();
        if ip > SPHERE_TOL * radius.max(1.0) * d.norm().max(1.0) {
            return Err(Error::OffSphere(format!("<d_{i} f, f> = {ip:.3e}")));
        }
    }
    Ok(Some(x / radius))
}

/// Orthonormal tangent frame by Gram–Schmidt on the first derivatives, and a
/// normal frame completing it (orthogonal to the radial direction for a
/// sphere ambient).
pub fn frames(ambient: &AmbientSpace, jet: &Jet2) -> Result<FramedPoint> {
    let n = jet.n();
    let dim = jet.dim();
    if dim != ambient.vector_dim() {
        return Err(Error::Dimension(format!("jet vectors have length {dim}, ambient needs {}", ambient.vector_dim())));
    }
    let radial = check_sphere_jet(ambient, jet)?;

    let d1 = DMatrix::from_fn(dim, n, |k, i| jet.first(i)[k]);
    let sv = d1.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::RankDeficient { n, ratio: if smax > 0.0 { smin / smax } else { 0.0 } });
    }

    // Modified Gram-Schmidt with one re-orthogonalisation pass, tracking the
    // triangular change of basis.
    let mut tangent = DMatrix::zeros(dim, n);
    let mut coords = DMatrix::<f64>::zeros(n, n);
    for a in 0..n {
        let mut v = d1.column(a).into_owned();
        let mut c = DVector::<f64>::zeros(n);
        c[a] = 1.0;
        for _ in 0..2 {
            for b in 0..a {
                let eb = tangent.column(b);
                let p = eb.dot(&v);
                v -= p * eb;
                c -= p * coords.column(b);
            }
        }
        let norm = v.norm();
        tangent.set_column(a, &(v / norm));
        coords.set_column(a, &(c / norm));
    }

    let expected = ambient.dim() - n;
    let mut basis: Vec<DVector<f64>> = tangent.column_iter().map(|c| c.into_owned()).collect();
    basis.extend(radial.iter().cloned());
    let mut normal = Vec::with_capacity(expected);
    let mut used = vec![false; dim];
    while normal.len() < expected {
        let mut best: Option<(usize, DVector<f64>, f64)> = None;
        for (k, taken) in used.iter().enumerate() {
            if *taken {
                continue;
            }
            let mut v = DVector::<f64>::zeros(dim);
            v[k] = 1.0;
            for _ in 0..2 {
                for b in basis.iter().chain(normal.iter()) {
                    let p = b.dot(&v);
                    v -= p * b;
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |(_, _, bn)| norm > *bn) {
                best = Some((k, v, norm));
            }
        }
        match best {
            Some((k, v, norm)) if norm > 1e-6 => {
                used[k] = true;
                normal.push(v / norm);
            }
            _ => return Err(Error::NormalDimension { expected, found: normal.len() }),
        }
    }
    let normal = if expected == 0 { DMatrix::zeros(dim, 0) } else { DMatrix::from_columns(&normal) };
    Ok(FramedPoint { tangent, normal, coords, radial })
}

pub fn frames_at(chart: &Chart, u: &[f64]) -> Result<FramedPoint> {
    frames(chart.ambient(), &chart.jet(u)?)
}

/// Second fundamental form `alpha_{ij}^a`, symmetric in `(i, j)` and stored
/// once per unordered pair, together with the ambient curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sff {
    n: usize,
    m: usize,
    curvature: f64,
    data: Vec<f64>,
}

impl Sff {
    pub fn zeros(n: usize, m: usize, curvature: f64) -> Self {
        Self { n, m, curvature, data: vec![0.0; n * (n + 1) / 2 * m] }
    }

    /// Build from `f(i, j, a)`, which is only called with `i <= j`.
    pub fn from_fn(n: usize, m: usize, curvature: f64, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(n, m, curvature);
        for i in 0..n {
            for j in i..n {
                let p = pair_index(n, i, j);
                for a in 0..m {
                    s.data[p * m + a] = f(i, j, a);
                }
            }
        }
        s
    }

    /// Umbilical form `alpha(X, Y) = <X, Y> eta`.
    pub fn umbilical(n: usize, eta: &[f64], curvature: f64) -> Self {
        Self::from_fn(n, eta.len(), curvature, |i, j, a| if i == j { eta[a] } else { 0.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    pub fn with_curvature(mut self, curvature: f64) -> Self {
        self.curvature = curvature;
        self
    }

    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        let p = pair_index(self.n, i, j);
        &self.data[p * self.m..(p + 1) * self.m]
    }

    pub fn entry(&self, i: usize, j: usize, a: usize) -> f64 {
        self.data[pair_index(self.n, i, j) * self.m + a]
    }

    pub fn set(&mut self, i: usize, j: usize, v: &[f64]) {
        let p = pair_index(self.n, i, j);
        self.data[p * self.m..(p + 1) * self.m].copy_from_slice(v);
    }

    /// `<alpha_ij, alpha_kl>`.
    pub fn inner(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.get(i, j).iter().zip(self.get(k, l)).map(|(a, b)| a * b).sum()
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Express in a new (possibly partial) tangent frame whose vectors are
    /// the columns of `q` in the current frame.
    pub fn in_tangent_frame(&self, q: &DMatrix<f64>) -> Self {
        assert_eq!(q.nrows(), self.n);
        let nq = q.ncols();
        let m = self.m;
        let mut out = Self::zeros(nq, m, self.curvature);
        let mut buf = vec![0.0; m];
        for a in 0..nq {
            for b in a..nq {
                buf.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..self.n {
                    for j in 0..self.n {
                        let w = q[(i, a)] * q[(j, b)];
                        if w != 0.0 {
                            for (o, v) in buf.iter_mut().zip(self.get(i, j)) {
                                *o += w * v;
                            }
                        }
                    }
                }
                out.set(a, b, &buf);
            }
        }
        out
    }

    /// Express in a new normal frame whose vectors are the columns of `p`.
    pub fn in_normal_frame(&self, p: &DMatrix<f64>) -> Self {
        assert_eq!(p.nrows(), self.m);
        let mq = p.ncols();
        Self::from_fn(self.n, mq, self.curvature, |i, j, b| {
            self.get(i, j).iter().enumerate().map(|(a, v)| v * p[(a, b)]).sum()
        })
    }

    /// Squared length of the whole tensor.
    pub fn norm_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.inner(i, j, i, j);
            }
        }
        s
    }

    pub fn mean_vector(&self) -> Vec<f64> {
        (0..self.m).map(|a| (0..self.n).map(|i| self.entry(i, i, a)).sum::<f64>() / self.n as f64).collect()
    }

    /// Difference to another form of the same shape, as a max-abs norm.
    pub fn max_abs_diff(&self, other: &Sff) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn param_projection(jet: &Jet2, v: &DVector<f64>) -> DMatrix<f64> {
    let n = jet.n();
    DMatrix::from_fn(n, n, |i, j| jet.second(i, j).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
}

/// Project second derivatives onto the normal frame and express the result in
/// the orthonormal tangent frame. Tangential components drop out by
/// projection, which accounts for the Christoffel terms.
pub fn second_fundamental_form(ambient: &AmbientSpace, fp: &FramedPoint, jet: &Jet2) -> Result<Sff> {
    let n = jet.n();
    if fp.n() != n || fp.tangent.nrows() != jet.dim() {
        return Err(Error::Dimension("framed point does not match jet".into()));
    }
    let m = fp.m();
    let t = &fp.coords;
    let per_normal: Vec<DMatrix<f64>> =
        (0..m).map(|a| t.transpose() * param_projection(jet, &fp.normal.column(a).into_owned()) * t).collect();
    Ok(Sff::from_fn(n, m, ambient.curvature(), |i, j, a| per_normal[a][(i, j)]))
}

/// The discarded radial part of the second derivatives in the orthonormal
/// frame, and its deviation from `-delta_ij / R`.
pub fn radial_part(ambient: &AmbientSpace, fp: &FramedPoint, jet: &Jet2) -> Option<(DMatrix<f64>, f64)> {
    let radius = ambient.radius()?;
    let radial = fp.radial.as_ref()?;
    let t = &fp.coords;
    let rad = t.transpose() * param_projection(jet, radial) * t;
    let n = rad.nrows();
    let expected = DMatrix::<f64>::identity(n, n) * (-1.0 / radius);
    let residual = (&rad - expected).amax();
    Some((rad, residual))
}

/// Frames and second fundamental form of a chart at `u`.
pub fn sff_at(chart: &Chart, u: &[f64]) -> Result<(FramedPoint, Sff)> {
    let jet = chart.jet(u)?;
    let fp = frames(chart.ambient(), &jet)?;
    let sff = second_fundamental_form(chart.ambient(), &fp, &jet)?;
    Ok((fp, sff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    /// Squared length of the second fundamental form.
    pub s: f64,
    /// Mean curvature.
    pub h: f64,
    pub mean_vector: Vec<f64>,
    /// `S - n H^2`.
    pub traceless_sq: f64,
    /// Dimension of the relative nullity space.
    pub nullity_dim: usize,
    /// Dimension of the first normal space (effective codimension).
    pub first_normal_dim: usize,
    pub n: usize,
}

fn numerical_rank(mat: DMatrix<f64>, tol: f64) -> usize {
    if mat.nrows() == 0 || mat.ncols() == 0 {
        return 0;
    }
    let sv = mat.svd(false, false).singular_values;
    let smax = sv.max();
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

pub fn invariants(sff: &Sff) -> Invariants {
    let n = sff.n();
    let m = sff.m();
    let s = sff.norm_sq();
    let mean_vector = sff.mean_vector();
    let h2: f64 = mean_vector.iter().map(|v| v * v).sum();
    let flat = DMatrix::from_fn(n, n * m, |i, c| sff.entry(i, c / m, c % m));
    let nullity_dim = n - numerical_rank(flat, NULLITY_TOL);
    let pairs = n * (n + 1) / 2;
    let normals = DMatrix::from_fn(m, pairs, |a, p| sff.raw()[p * m + a]);
    let first_normal_dim = numerical_rank(normals, NULLITY_TOL);
    Invariants {
        s,
        h: h2.sqrt(),
        mean_vector,
        traceless_sq: s - n as f64 * h2,
        nullity_dim,
        first_normal_dim,
        n,
    }
}

/// Matrix of the shape operator `A_xi` for a unit normal given by its
/// coefficients in the normal frame.
pub fn shape_operator(sff: &Sff, xi: &[f64]) -> Result<DMatrix<f64>> {
    if xi.len() != sff.m() {
        return Err(Error::Dimension(format!("normal has {} coefficients, codimension is {}", xi.len(), sff.m())));
    }
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnit(norm));
    }
    Ok(shape_matrix(sff, xi))
}

/// `sum_a xi_a alpha_ij^a` without the unit-length check.
pub fn shape_matrix(sff: &Sff, xi: &[f64]) -> DMatrix<f64> {
    let n = sff.n();
    DMatrix::from_fn(n, n, |i, j| sff.get(i, j).iter().zip(xi).map(|(a, b)| a * b).sum())
}

/// Finite-difference 2-jet of a position map: central differences with step
/// `cbrt(eps)(1+|u_i|)` for first derivatives and `eps^(1/4)(1+|u_i|)` for
/// second derivatives; optionally Richardson-extrapolated.
pub fn fd_jet(n: usize, position: impl Fn(&[f64]) -> Result<Vec<f64>>, u: &[f64], richardson: bool) -> Result<Jet2> {
    let f0 = position(u)?;
    let dim = f0.len();
    let shifted = |steps: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut v = u.to_vec();
        for &(i, h) in steps {
            v[i] += h;
        }
        position(&v)
    };
    let first = |i: usize, h: f64| -> Result<Vec<f64>> {
        let p = shifted(&[(i, h)])?;
        let m = shifted(&[(i, -h)])?;
        Ok(p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let second = |i: usize, j: usize, hi: f64, hj: f64| -> Result<Vec<f64>> {
        if i == j {
            let p = shifted(&[(i, hi)])?;
            let m = shifted(&[(i, -hi)])?;
            Ok((0..dim).map(|k| (p[k] - 2.0 * f0[k] + m[k]) / (hi * hi)).collect())
        } else {
            let pp = shifted(&[(i, hi), (j, hj)])?;
            let pm = shifted(&[(i, hi), (j, -hj)])?;
            let mp = shifted(&[(i, -hi), (j, hj)])?;
            let mm = shifted(&[(i, -hi), (j, -hj)])?;
            Ok((0..dim).map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * hi * hj)).collect())
        }
    };
    let extrapolate = |coarse: Vec<f64>, fine: Vec<f64>| -> Vec<f64> {
        coarse.iter().zip(&fine).map(|(c, f)| f + (f - c) / 3.0).collect()
    };
    let h1: Vec<f64> = u.iter().map(|x| f64::EPSILON.cbrt() * (1.0 + x.abs())).collect();
    let h2: Vec<f64> = u.iter().map(|x| f64::EPSILON.powf(0.25) * (1.0 + x.abs())).collect();
    let mut d1 = Vec::with_capacity(n * dim);
    for i in 0..n {
        let mut d = first(i, h1[i])?;
        if richardson {
            d = extrapolate(first(i, 2.0 * h1[i])?, d);
        }
        d1.extend(d);
    }
    let mut d2 = Vec::with_capacity(n * (n + 1) / 2 * dim);
    for i in 0..n {
        for j in i..n {
            let mut d = second(i, j, h2[i], h2[j])?;
            if richardson {
                d = extrapolate(second(i, j, 2.0 * h2[i], 2.0 * h2[j])?, d);
            }
            d2.extend(d);
        }
    }
    Jet2::new(n, f0, d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn plane() -> Chart {
        Chart::from_multijet(
            "plane",
            AmbientSpace::euclidean(3),
            ParamDomain::new(vec![Coord::interval(-1.0, 1.0); 2]),
            |u| Ok(vec![u[0].clone(), u[1].clone(), MultiJet::constant(2, 0.0)]),
        )
        .unwrap()
    }

    /// Unit sphere `S^2` as the graph over the equatorial disc.
    fn sphere_graph(ambient: AmbientSpace) -> Chart {
        Chart::from_multijet("s2", ambient, ParamDomain::new(vec![Coord::interval(-0.5, 0.5); 2]), |u| {
            let r2 = &u[0].square() + &u[1].square();
            let z = (&MultiJet::constant(2, 1.0) - &r2).sqrt();
            Ok(vec![u[0].clone(), u[1].clone(), z])
        })
        .unwrap()
    }

    #[test]
    fn pair_index_order() {
        let n = 4;
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                assert_eq!(pair_index(n, i, j), k);
                assert_eq!(pair_index(n, j, i), k);
                k += 1;
            }
        }
    }

    #[test]
    fn plane_frame_is_coordinate_axes() {
        let fp = frames_at(&plane(), &[0.3, -0.2]).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((&fp.tangent - expected).amax() < 1e-15);
        assert!(fp.gram_residual() < 1e-15);
        let (_, sff) = sff_at(&plane(), &[0.3, -0.2]).unwrap();
        assert_eq!(sff.norm_sq(), 0.0);
        let sh = shape_operator(&sff, &[1.0]).unwrap();
        assert_eq!(sh.amax(), 0.0);
    }

    #[test]
    fn degenerate_chart_is_rank_deficient() {
        let chart = Chart::from_multijet(
            "degenerate",
            AmbientSpace::euclidean(3),
            ParamDomain::new(vec![Coord::interval(-1.0, 1.0); 2]),
            |u| Ok(vec![u[0].clone(), u[0].clone(), MultiJet::constant(2, 0.0)]),
        )
        .unwrap();
        assert!(matches!(frames_at(&chart, &[0.1, 0.2]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn sphere_pole_frame() {
        let chart = sphere_graph(AmbientSpace::euclidean(3));
        let jet = chart.jet(&[0.0, 0.0]).unwrap();
        let fp = frames(chart.ambient(), &jet).unwrap();
        assert!(fp.gram_residual() <= 1e-12);
        let x = DVector::from_column_slice(jet.position());
        for c in fp.tangent.column_iter() {
            assert!(c.dot(&x).abs() <= 1e-12);
        }
        let sff = second_fundamental_form(chart.ambient(), &fp, &jet).unwrap();
        let inv = invariants(&sff);
        assert!((inv.s - 2.0).abs() < 1e-12);
        assert!((inv.h - 1.0).abs() < 1e-12);
        assert!(inv.traceless_sq.abs() < 1e-12);
    }

    #[test]
    fn umbilical_shape_operator_is_scalar() {
        let eta = [0.6, -0.8, 0.0];
        let sff = Sff::umbilical(3, &eta, 0.0);
        let xi = [0.0, 1.0, 0.0];
        let a = shape_operator(&sff, &xi).unwrap();
        assert!((a - DMatrix::<f64>::identity(3, 3) * -0.8).amax() < 1e-15);
        assert!(invariants(&sff).traceless_sq.abs() < 1e-15);
        assert!(matches!(shape_operator(&sff, &[1.0, 1.0, 0.0]), Err(Error::NotUnit(_))));
    }

    #[test]
    fn cylinder_nullity() {
        // S^1 x R in R^3
        let chart = Chart::from_multijet(
            "cylinder",
            AmbientSpace::euclidean(3),
            ParamDomain::new(vec![Coord::circle(), Coord::interval(-1.0, 1.0)]),
            |u| Ok(vec![u[0].cos(), u[0].sin(), u[1].clone()]),
        )
        .unwrap();
        let (_, sff) = sff_at(&chart, &[0.4, 0.1]).unwrap();
        let inv = invariants(&sff);
        assert_eq!(inv.nullity_dim, 1);
        assert_eq!(inv.first_normal_dim, 1);
        assert!((inv.s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_in_sphere_ambient_is_totally_geodesic() {
        // The equator S^2 of S^3: radial part is umbilical, the rest vanishes.
        let ambient = AmbientSpace::unit_sphere(3);
        let chart = Chart::from_multijet("equator", ambient, ParamDomain::new(vec![Coord::interval(-0.5, 0.5); 2]), |u| {
            let r2 = &u[0].square() + &u[1].square();
            let z = (&MultiJet::constant(2, 1.0) - &r2).sqrt();
            Ok(vec![u[0].clone(), u[1].clone(), z, MultiJet::constant(2, 0.0)])
        })
        .unwrap();
        let jet = chart.jet(&[0.2, 0.1]).unwrap();
        let fp = frames(chart.ambient(), &jet).unwrap();
        assert_eq!(fp.m(), 1);
        assert!(fp.gram_residual() < 1e-12);
        let sff = second_fundamental_form(chart.ambient(), &fp, &jet).unwrap();
        assert!(sff.norm_sq() < 1e-24);
        let (_, residual) = radial_part(chart.ambient(), &fp, &jet).unwrap();
        assert!(residual < 1e-12);
        assert_eq!(invariants(&sff).first_normal_dim, 0);
    }

    #[test]
    fn off_sphere_jet_is_rejected() {
        let chart = sphere_graph(AmbientSpace::euclidean(3));
        let mut jet = chart.jet(&[0.1, 0.1]).unwrap();
        jet.position[2] += 1e-3;
        let res = frames(&AmbientSpace::unit_sphere(2), &jet);
        assert!(matches!(res, Err(Error::OffSphere(_)) | Err(Error::Dimension(_))));
        let jet4 = Jet2::new(2, vec![0.0, 0.0, 0.9, 0.0], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0; 12]).unwrap();
        assert!(matches!(frames(&AmbientSpace::unit_sphere(3), &jet4), Err(Error::OffSphere(_))));
    }

    #[test]
    fn fd_jets_agree() {
        let chart = sphere_graph(AmbientSpace::euclidean(3));
        for richardson in [false, true] {
            let u = [0.21, -0.13];
            let fd = fd_jet(2, |v| chart.position(v), &u, richardson).unwrap();
            let exact = chart.jet(&u).unwrap();
            assert!(fd.max_abs_diff(&exact) < 1e-6, "{}", fd.max_abs_diff(&exact));
        }
    }

    #[test]
    fn grid_sizes() {
        let d = ParamDomain::new(vec![Coord::circle(), Coord::interval(0.0, 1.0)]);
        let g = d.grid(5);
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], vec![0.0, 0.1]);
        assert_eq!(d.random_points(3, 9), d.random_points(3, 9));
    }
}
