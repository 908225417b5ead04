//! Intrinsic and normal curvature from the second fundamental form.
//!
//! Index conventions: `R_ijkl = <R(e_i, e_j) e_k, e_l>` with
//! `R(X, Y) = [D_X, D_Y] - D_[X,Y]`, so the sectional curvature of the plane
//! `e_i ^ e_j` is `R_ijji`. With this convention the Gauss equation reads
//!
//! ```text
//! R_ijkl = c (d_il d_jk - d_ik d_jl) + <a_il, a_jk> - <a_ik, a_jl>
//! ```
//!
//! and the unit 4-sphere has `Ric = 3 Id` and Bochner–Weitzenböck operator
//! `4 Id` on 2-vectors.
//!
//! In dimension four the isotropic-curvature expression of a frame equals the
//! quadratic form of the Bochner–Weitzenböck operator on the unit 2-vector
//! `(e_12 - e_34)/sqrt 2` (checked by `isotropic_is_bw_form_on_frame_bivector`
//! below). The minimum over frames therefore equals the smallest eigenvalue of
//! the operator; nothing in the crate relies on this shortcut except
//! [`isotropic_seed_frame`], which only proposes a starting frame.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::engine::{invariants, shape_matrix, Chart, FramedPoint, Sff};
use crate::frameopt::{self, FrameSettings};
use crate::pinch;
use crate::{Error, Result};

/// Tolerance for structural predicates (eigenvalue multiplicities, case
/// detection), relative to the size of the tensor.
pub const STRUCTURE_TOL: f64 = 1e-6;
/// Threshold for a flat normal bundle, relative to `|alpha|^2`.
pub const FLAT_TOL: f64 = 1e-8;
/// Required accuracy of the adapted-frame conditions.
pub const ADAPTED_TOL: f64 = 1e-9;
/// Orthonormality tolerance for frames supplied to isotropic curvature.
pub const FRAME_TOL: f64 = 1e-10;

/// Curvature tensor of an `n`-dimensional tangent space, stored in full.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvTensor {
    n: usize,
    data: Vec<f64>,
}

impl CurvTensor {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n * n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        let p = self.idx(i, j, k, l);
        self.data[p] = v;
    }

    /// Sectional curvature of the coordinate plane `e_i ^ e_j`.
    pub fn sectional(&self, i: usize, j: usize) -> f64 {
        self.get(i, j, j, i)
    }

    /// Sectional curvature of the plane spanned by two orthonormal vectors.
    pub fn sectional_of(&self, x: &[f64], y: &[f64]) -> f64 {
        self.contract(x, y, y, x)
    }

    /// `R(x, y, z, w)` for arbitrary vectors.
    pub fn contract(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let n = self.n;
        let mut s = 0.0;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..n {
                    let xyz = xy * z[k];
                    if xyz == 0.0 {
                        continue;
                    }
                    let base = self.idx(i, j, k, 0);
                    for l in 0..n {
                        s += xyz * w[l] * self.data[base + l];
                    }
                }
            }
        }
        s
    }

    /// Components in a new frame whose vectors are the columns of `q`.
    pub fn in_frame(&self, q: &DMatrix<f64>) -> Self {
        let nq = q.ncols();
        let cols: Vec<Vec<f64>> = (0..nq).map(|a| q.column(a).iter().copied().collect()).collect();
        let mut out = Self::zeros(nq);
        for a in 0..nq {
            for b in 0..nq {
                for c in 0..nq {
                    for d in 0..nq {
                        out.set(a, b, c, d, self.contract(&cols[a], &cols[b], &cols[c], &cols[d]));
                    }
                }
            }
        }
        out
    }

    /// Largest violation of the first Bianchi identity and of the pair
    /// symmetries.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        r = r.max((v + self.get(j, i, k, l)).abs());
                        r = r.max((v + self.get(i, j, l, k)).abs());
                        r = r.max((v - self.get(k, l, i, j)).abs());
                        r = r.max((v + self.get(j, k, i, l) + self.get(k, i, j, l)).abs());
                    }
                }
            }
        }
        r
    }

    pub fn max_abs_diff(&self, other: &CurvTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Curvature of the induced metric via the Gauss equation.
pub fn gauss_curvature(sff: &Sff) -> CurvTensor {
    let n = sff.n();
    let c = sff.curvature();
    let mut ip = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    ip[((i * n + j) * n + k) * n + l] = sff.inner(i, j, k, l);
                }
            }
        }
    }
    let g = |i: usize, j: usize, k: usize, l: usize| ip[((i * n + j) * n + k) * n + l];
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut r = CurvTensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let v = c * (d(i, l) * d(j, k) - d(i, k) * d(j, l)) + g(i, l, j, k) - g(i, k, j, l);
                    r.set(i, j, k, l, v);
                }
            }
        }
    }
    r
}

fn metric_and_derivative(chart: &Chart, u: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let jet = chart.jet(u)?;
    let n = jet.n();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let g = DMatrix::from_fn(n, n, |i, j| dot(jet.first(i), jet.first(j)));
    let dg = (0..n)
        .map(|k| DMatrix::from_fn(n, n, |i, j| dot(jet.second(i, k), jet.first(j)) + dot(jet.first(i), jet.second(j, k))))
        .collect();
    Ok((g, dg))
}

/// `gamma[l][i * n + j] = Gamma^l_ij`.
fn christoffel(chart: &Chart, u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (g, dg) = metric_and_derivative(chart, u)?;
    let n = g.nrows();
    let inv = g.try_inverse().ok_or_else(|| Error::RankDeficient { n, ratio: 0.0 })?;
    let mut gamma = vec![vec![0.0; n * n]; n];
    for (l, gl) in gamma.iter_mut().enumerate() {
        for i in 0..n {
            for j in 0..n {
                gl[i * n + j] = 0.5 * (0..n).map(|m| inv[(l, m)] * (dg[i][(m, j)] + dg[j][(m, i)] - dg[m][(i, j)])).sum::<f64>();
            }
        }
    }
    Ok(gamma)
}

/// Riemann tensor of the induced metric, from Christoffel symbols and their
/// extrapolated central differences, expressed in the orthonormal frame of `fp`.
pub fn intrinsic_curvature(chart: &Chart, u: &[f64], fp: &FramedPoint) -> Result<CurvTensor> {
    let n = chart.n();
    let (g, _) = metric_and_derivative(chart, u)?;
    let gamma = christoffel(chart, u)?;
    let mut dgamma = Vec::with_capacity(n);
    for k in 0..n {
        let central = |h: f64| -> Result<Vec<Vec<f64>>> {
            let (mut up, mut dn) = (u.to_vec(), u.to_vec());
            up[k] += h;
            dn[k] -= h;
            let (a, b) = (christoffel(chart, &up)?, christoffel(chart, &dn)?);
            Ok(a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) / (2.0 * h)).collect()).collect())
        };
        // Richardson step: fourth-order accurate.
        let h = 1e-3 * (1.0 + u[k].abs());
        let (coarse, fine) = (central(h)?, central(0.5 * h)?);
        let d: Vec<Vec<f64>> = coarse.iter().zip(&fine).map(|(c, f)| c.iter().zip(f).map(|(a, b)| (4.0 * b - a) / 3.0).collect()).collect();
        dgamma.push(d);
    }
    let gm = |l: usize, i: usize, j: usize| gamma[l][i * n + j];
    let mut coord = CurvTensor::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                // R(d_i, d_j) d_k = R^m_ijk d_m
                let up: Vec<f64> = (0..n)
                    .map(|m| {
                        dgamma[i][m][j * n + k] - dgamma[j][m][i * n + k]
                            + (0..n).map(|p| gm(m, i, p) * gm(p, j, k) - gm(m, j, p) * gm(p, i, k)).sum::<f64>()
                    })
                    .collect();
                for l in 0..n {
                    coord.set(i, j, k, l, (0..n).map(|m| g[(l, m)] * up[m]).sum());
                }
            }
        }
    }
    Ok(coord.in_frame(&fp.coords))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciData {
    pub ric: DMatrix<f64>,
    pub scalar: f64,
}

/// `ric_jk = sum_i R_jiik`, `scalar = trace(ric)`.
pub fn ricci_scalar(r: &CurvTensor) -> RicciData {
    let n = r.n();
    let ric = DMatrix::from_fn(n, n, |j, k| (0..n).map(|i| r.get(j, i, i, k)).sum());
    let scalar = ric.trace();
    RicciData { ric, scalar }
}

/// Normal curvature `<R^perp(e_i, e_j) xi_a, xi_b>` for `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalCurv {
    pub n: usize,
    pub m: usize,
    /// One `m x m` matrix per pair `i < j` in lexicographic order; entry
    /// `(b, a)` is `<R^perp(e_i, e_j) xi_a, xi_b>`.
    pub components: Vec<DMatrix<f64>>,
    pub max_abs: f64,
    pub flat: bool,
}

impl NormalCurv {
    pub fn component(&self, i: usize, j: usize) -> DMatrix<f64> {
        if i == j {
            return DMatrix::zeros(self.m, self.m);
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let p = wedge_index(self.n, a, b);
        &self.components[p] * sign
    }
}

/// From the Ricci equation `R^perp(X, Y) xi = alpha(X, A_xi Y) - alpha(A_xi X, Y)`.
pub fn normal_curvature(sff: &Sff) -> NormalCurv {
    let n = sff.n();
    let m = sff.m();
    let mut components = Vec::with_capacity(n * (n - 1) / 2);
    let mut max_abs: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let comp = DMatrix::from_fn(m, m, |b, a| {
                (0..n).map(|k| sff.entry(j, k, a) * sff.entry(i, k, b) - sff.entry(i, k, a) * sff.entry(j, k, b)).sum()
            });
            max_abs = max_abs.max(comp.amax());
            components.push(comp);
        }
    }
    let scale = sff.norm_sq();
    let flat = max_abs <= FLAT_TOL * scale || scale == 0.0;
    NormalCurv { n, m, components, max_abs, flat }
}

/// Index of `e_i ^ e_j`, `i < j`, in lexicographic order.
pub fn wedge_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub fn wedge_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BivectorBasis {
    /// `e_i ^ e_j`, `i < j`, lexicographic.
    Lexicographic,
    /// `eta_1..eta_6` for n = 4 (self-dual triple first).
    Eta,
}

/// Matrix of the Bochner–Weitzenböck operator on 2-vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwMatrix {
    pub n: usize,
    pub matrix: DMatrix<f64>,
    pub basis: BivectorBasis,
}

impl BwMatrix {
    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone()).eigenvalues.min()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.matrix.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Re-express an n = 4 operator in the eta basis.
    pub fn to_eta_basis(&self, orientation: Orientation) -> Result<BwMatrix> {
        if self.n != 4 {
            return Err(Error::Dimension(format!("eta basis needs n = 4, got {}", self.n)));
        }
        let lex = match self.basis {
            BivectorBasis::Lexicographic => self.matrix.clone(),
            BivectorBasis::Eta => return Ok(self.clone()),
        };
        let e = eta_basis(orientation);
        Ok(BwMatrix { n: 4, matrix: &e * lex * e.transpose(), basis: BivectorBasis::Eta })
    }
}

/// Operator on `Lambda^2` in the lexicographic basis:
///
/// ```text
/// <<B(v1^v2), w1^w2>> = Ric(v1,w1)<v2,w2> + Ric(v2,w2)<v1,w1>
///                     - Ric(v1,w2)<v2,w1> - Ric(v2,w1)<v1,w2>
///                     - 2 <R(v1,v2)w2, w1>
/// ```
pub fn bw_operator(r: &CurvTensor, ric: &RicciData) -> BwMatrix {
    let n = r.n();
    let pairs = wedge_pairs(n);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let rc = &ric.ric;
    let q = pairs.len();
    let matrix = DMatrix::from_fn(q, q, |p1, p2| {
        let (i, j) = pairs[p1];
        let (k, l) = pairs[p2];
        rc[(i, k)] * d(j, l) + rc[(j, l)] * d(i, k) - rc[(i, l)] * d(j, k) - rc[(j, k)] * d(i, l) - 2.0 * r.get(i, j, l, k)
    });
    BwMatrix { n, matrix, basis: BivectorBasis::Lexicographic }
}

/// Convenience: Gauss equation, Ricci contraction and the operator.
pub fn bw_from_sff(sff: &Sff) -> BwMatrix {
    let r = gauss_curvature(sff);
    let ric = ricci_scalar(&r);
    bw_operator(&r, &ric)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// `e_1 ^ e_2 ^ e_3 ^ e_4` is positive.
    #[default]
    Positive,
    Negative,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }
}

/// Hodge star on `Lambda^2 R^4` in the lexicographic basis.
pub fn hodge_star(orientation: Orientation) -> DMatrix<f64> {
    // *e12 = e34, *e13 = -e24, *e14 = e23 and the inverse relations.
    let images = [(0, 5, 1.0), (1, 4, -1.0), (2, 3, 1.0), (3, 2, 1.0), (4, 1, -1.0), (5, 0, 1.0)];
    let mut s = DMatrix::zeros(6, 6);
    for (from, to, sign) in images {
        s[(to, from)] = sign * orientation.sign();
    }
    s
}

/// Rows are `eta_1..eta_6` in lexicographic coordinates:
/// `eta_1 = (e12 + e34)/sqrt2`, `eta_2 = (e13 - e24)/sqrt2`,
/// `eta_3 = (e14 + e23)/sqrt2` span the self-dual part and
/// `eta_4 = (e12 - e34)/sqrt2`, `eta_5 = (e13 + e24)/sqrt2`,
/// `eta_6 = (e14 - e23)/sqrt2` the anti-self-dual part (for the positive
/// orientation; the two triples swap roles for the negative one).
pub fn eta_basis(orientation: Orientation) -> DMatrix<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // lexicographic order: e12 e13 e14 e23 e24 e34
    let plus = [[h, 0.0, 0.0, 0.0, 0.0, h], [0.0, h, 0.0, 0.0, -h, 0.0], [0.0, 0.0, h, h, 0.0, 0.0]];
    let minus = [[h, 0.0, 0.0, 0.0, 0.0, -h], [0.0, h, 0.0, 0.0, h, 0.0], [0.0, 0.0, h, -h, 0.0, 0.0]];
    let rows: Vec<[f64; 6]> = match orientation {
        Orientation::Positive => plus.iter().chain(minus.iter()).copied().collect(),
        Orientation::Negative => minus.iter().chain(plus.iter()).copied().collect(),
    };
    DMatrix::from_fn(6, 6, |r, c| rows[r][c])
}

/// Restrictions of the operator to the self-dual and anti-self-dual
/// eigenspaces of the Hodge star, in the eta basis.
pub fn hodge_split(bw: &BwMatrix, orientation: Orientation) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eta = bw.to_eta_basis(orientation)?.matrix;
    Ok((eta.view((0, 0), (3, 3)).into_owned(), eta.view((3, 3), (3, 3)).into_owned()))
}

/// `|| B * - * B ||_max` for an n = 4 operator in the lexicographic basis.
pub fn star_commutator(bw: &BwMatrix) -> Result<f64> {
    if bw.n != 4 || bw.basis != BivectorBasis::Lexicographic {
        return Err(Error::Dimension("commutator check needs n = 4 in the lexicographic basis".into()));
    }
    let s = hodge_star(Orientation::Positive);
    Ok((&bw.matrix * &s - &s * &bw.matrix).amax())
}

fn orthonormality_residual(frame: &DMatrix<f64>) -> f64 {
    let g = frame.transpose() * frame;
    (g - DMatrix::<f64>::identity(frame.ncols(), frame.ncols())).amax()
}

/// `R_1331 + R_1441 + R_2332 + R_2442 - 2 R_1234` for an orthonormal
/// four-frame (columns of `frame`, expressed in the tangent frame of `r`).
pub fn isotropic_curvature(r: &CurvTensor, frame: &DMatrix<f64>) -> Result<f64> {
    if frame.nrows() != r.n() || frame.ncols() != 4 {
        return Err(Error::Dimension(format!("need an {} x 4 frame", r.n())));
    }
    let res = orthonormality_residual(frame);
    if res > FRAME_TOL {
        return Err(Error::NotOrthonormal(res));
    }
    Ok(isotropic_unchecked(r, frame))
}

pub(crate) fn isotropic_unchecked(r: &CurvTensor, frame: &DMatrix<f64>) -> f64 {
    let e: Vec<Vec<f64>> = (0..4).map(|a| frame.column(a).iter().copied().collect()).collect();
    r.contract(&e[0], &e[2], &e[2], &e[0])
        + r.contract(&e[0], &e[3], &e[3], &e[0])
        + r.contract(&e[1], &e[2], &e[2], &e[1])
        + r.contract(&e[1], &e[3], &e[3], &e[1])
        - 2.0 * r.contract(&e[0], &e[1], &e[2], &e[3])
}

/// `R` as a bilinear form on 2-vectors, `R(x, y, z, w) = <x^y, M z^w>` with
/// `M[(ij), (kl)] = R_ijkl` over lexicographic pairs. Evaluating isotropic
/// curvature this way is much cheaper than four-fold contraction.
struct BivectorForm {
    pairs: Vec<(usize, usize)>,
    m: Vec<f64>,
}

impl BivectorForm {
    fn new(r: &CurvTensor) -> Self {
        let pairs = wedge_pairs(r.n());
        let mut m = Vec::with_capacity(pairs.len() * pairs.len());
        for &(i, j) in &pairs {
            for &(k, l) in &pairs {
                m.push(r.get(i, j, k, l));
            }
        }
        Self { pairs, m }
    }

    fn wedge(&self, frame: &DMatrix<f64>, a: usize, b: usize) -> Vec<f64> {
        self.pairs.iter().map(|&(i, j)| frame[(i, a)] * frame[(j, b)] - frame[(j, a)] * frame[(i, b)]).collect()
    }

    fn bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        let d = self.pairs.len();
        p.iter().enumerate().map(|(s, ps)| ps * self.m[s * d..(s + 1) * d].iter().zip(q).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    fn isotropic(&self, frame: &DMatrix<f64>) -> f64 {
        let sectional = |a, b| {
            let p = self.wedge(frame, a, b);
            -self.bilinear(&p, &p)
        };
        sectional(0, 2) + sectional(0, 3) + sectional(1, 2) + sectional(1, 3) - 2.0 * self.bilinear(&self.wedge(frame, 0, 1), &self.wedge(frame, 2, 3))
    }
}

/// Result of minimising isotropic curvature over orthonormal four-frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotropicMin {
    pub value: f64,
    pub frame: DMatrix<f64>,
    pub random_min: f64,
    pub converged: bool,
}

/// Sample `samples` Haar-random frames, then refine the best frame of each
/// orientation class by Givens descent. Refinement is skipped once a frame
/// below `-stop_below` is found: the minimum is then certainly negative.
pub fn isotropic_min(r: &CurvTensor, samples: usize, settings: &FrameSettings, stop_below: Option<f64>) -> Result<IsotropicMin> {
    let n = r.n();
    if n < 4 {
        return Err(Error::Dimension(format!("isotropic curvature needs n >= 4, got {n}")));
    }
    let form = BivectorForm::new(r);
    let mut rng = frameopt::rng(settings.seed, 0);
    let mut best: [Option<(f64, DMatrix<f64>)>; 2] = [None, None];
    for _ in 0..samples.max(1) {
        let q = frameopt::haar_orthogonal(n, &mut rng);
        let frame = q.columns(0, 4).into_owned();
        let v = form.isotropic(&frame);
        let class = if q.determinant() > 0.0 { 0 } else { 1 };
        if best[class].as_ref().map_or(true, |(b, _)| v < *b) {
            best[class] = Some((v, q));
        }
    }
    let random_min = best.iter().flatten().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let objective = |f: &DMatrix<f64>| form.isotropic(f);
    let mut out: Option<IsotropicMin> = None;
    let mut consider = |value: f64, frame: DMatrix<f64>, converged: bool| {
        if out.as_ref().map_or(true, |o| value < o.value) {
            out = Some(IsotropicMin { value, frame, random_min, converged });
        }
    };
    if let Some(t) = stop_below {
        if random_min < -t {
            let (v, q) = best.iter().flatten().min_by(|a, b| a.0.total_cmp(&b.0)).cloned().expect("sampled");
            consider(v, q.columns(0, 4).into_owned(), false);
            return Ok(out.expect("set"));
        }
    }
    for (_, start) in best.into_iter().flatten() {
        let res = frameopt::descend_from(start, 4, &objective, settings.tol, settings.max_sweeps);
        consider(res.value, res.frame, res.converged);
    }
    Ok(out.expect("at least one class sampled"))
}

/// A frame `(e_1..e_4)` in `R^4` with `(e_12 - e_34)/sqrt2 = omega` for a
/// unit self-dual or anti-self-dual 2-vector `omega` (lexicographic
/// coordinates). Used to seed isotropic minimisation from an eigenvector.
pub fn isotropic_seed_frame(omega: &DVector<f64>) -> Option<DMatrix<f64>> {
    // omega as a skew endomorphism J with <J v, w> = omega(v, w); sqrt2 J is
    // a complex structure.
    let pairs = wedge_pairs(4);
    let mut j = DMatrix::<f64>::zeros(4, 4);
    for (p, &(a, b)) in pairs.iter().enumerate() {
        j[(b, a)] = omega[p] * std::f64::consts::SQRT_2;
        j[(a, b)] = -omega[p] * std::f64::consts::SQRT_2;
    }
    let mut e1 = DVector::from_element(4, 0.0);
    e1[0] = 1.0;
    let e2 = &j * &e1;
    if (e2.norm() - 1.0).abs() > 1e-6 {
        return None;
    }
    // e3 orthogonal to e1, e2; e4 = -J e3 so that e34 cancels against e12.
    let mut e3 = DVector::from_element(4, 0.0);
    let mut best = 0.0;
    for k in 0..4 {
        let mut v = DVector::from_element(4, 0.0);
        v[k] = 1.0;
        v -= e1.dot(&v) * &e1 + e2.dot(&v) * &e2;
        if v.norm() > best {
            best = v.norm();
            e3 = v;
        }
    }
    e3 /= e3.norm();
    let e4 = -(&j * &e3);
    let f = DMatrix::from_columns(&[e1, e2, e3, e4]);
    (orthonormality_residual(&f) < 1e-9).then_some(f)
}

/// Outcome of comparing the two nonnegativity tests on random tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbReport {
    pub count: usize,
    pub seed: u64,
    pub nonnegative: usize,
    pub refined: usize,
    /// Samples whose verdicts differ only because both quantities fall
    /// between the two tolerances, `[-SB_ISO_TOL, -SB_BW_TOL)`.
    pub band: usize,
    pub disagreements: Vec<SbDisagreement>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbDisagreement {
    pub index: usize,
    pub bw_min: f64,
    pub isotropic_min: f64,
    pub sff: Sff,
}

pub const SB_BW_TOL: f64 = 1e-8;
pub const SB_ISO_TOL: f64 = 1e-6;

/// Random `n = 4` tensors rescaled to between half and one and a half times
/// the `k = 2` bound, so that both signs occur. For each, compare
/// `lambda_min(B) >= -1e-8` with `min isotropic >= -1e-6`, the latter from
/// `frames` random frames plus Givens refinement. Differing verdicts with
/// both values inside the tolerance band are counted, not failed.
pub fn sb_harness(count: usize, seed: u64, frames: usize, settings: &FrameSettings) -> SbReport {
    use rand::Rng;
    let per = |idx: usize| {
        let mut g = frameopt::rng(seed, idx as u64);
        let sff = loop {
            let m = g.gen_range(1..=4);
            let c = g.gen_range(0..2) as f64;
            let f = g.gen_range(0.5..1.5);
            if let Ok(Some(s)) = pinch::rescale_to_fraction(&pinch::random_sff(&mut g, 4, m, c), 2, f) {
                break s;
            }
        };
        let bw_min = bw_from_sff(&sff).min_eigenvalue();
        let local = FrameSettings { seed: seed.wrapping_add(idx as u64), exec: crate::par::Exec::Sequential, ..*settings };
        let iso = isotropic_min(&gauss_curvature(&sff), frames, &local, Some(SB_ISO_TOL)).expect("n = 4");
        (bw_min, iso, sff)
    };
    let results = settings.exec.map(count, per);
    let mut report = SbReport { count, seed, nonnegative: 0, refined: 0, band: 0, disagreements: Vec::new(), passed: true };
    for (index, (bw_min, iso, sff)) in results.into_iter().enumerate() {
        let a = bw_min >= -SB_BW_TOL;
        let b = iso.value >= -SB_ISO_TOL;
        report.nonnegative += a as usize;
        report.refined += (iso.random_min >= -SB_ISO_TOL) as usize;
        let in_band = |v: f64| (-SB_ISO_TOL..-SB_BW_TOL).contains(&v);
        if a != b && in_band(bw_min) && in_band(iso.value) {
            report.band += 1;
        } else if a != b {
            report.passed = false;
            if report.disagreements.len() < 10 {
                report.disagreements.push(SbDisagreement { index, bw_min, isotropic_min: iso.value, sff });
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Adapted frames and the closed-form operator

/// Residuals of the adapted-frame conditions:
/// `(a1)` `a11 = a22, a33 = a44, a12 = a34 = 0, |a23| = |a14|, |a24| = |a13|`;
/// `(a2)` `<a14 + a23, a13 - a24> = 0, <a13 + a24, a14 - a23> = 0`;
/// `(a3)` `|a13|^2 + |a14|^2 = c + <a11, a44>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptedResiduals {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl AdaptedResiduals {
    pub fn max(&self) -> f64 {
        self.a1.max(self.a2).max(self.a3)
    }
}

fn vsub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Named second-fundamental-form vectors of a four-frame, 1-based as in the
/// usual notation.
struct Alpha4<'a>(&'a Sff);

impl Alpha4<'_> {
    fn at(&self, i: usize, j: usize) -> &[f64] {
        self.0.get(i - 1, j - 1)
    }
}

pub fn adapted_residuals(sff: &Sff) -> Result<AdaptedResiduals> {
    if sff.n() != 4 {
        return Err(Error::Dimension(format!("adapted frames need n = 4, got {}", sff.n())));
    }
    let a = Alpha4(sff);
    let c = sff.curvature();
    let a1 = [
        max_abs(&vsub(a.at(1, 1), a.at(2, 2))),
        max_abs(&vsub(a.at(3, 3), a.at(4, 4))),
        max_abs(a.at(1, 2)),
        max_abs(a.at(3, 4)),
        (norm(a.at(2, 3)) - norm(a.at(1, 4))).abs(),
        (norm(a.at(2, 4)) - norm(a.at(1, 3))).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    let a2 = dot(&vadd(a.at(1, 4), a.at(2, 3)), &vsub(a.at(1, 3), a.at(2, 4)))
        .abs()
        .max(dot(&vadd(a.at(1, 3), a.at(2, 4)), &vsub(a.at(1, 4), a.at(2, 3))).abs());
    let a3 = (dot(a.at(1, 3), a.at(1, 3)) + dot(a.at(1, 4), a.at(1, 4)) - c - dot(a.at(1, 1), a.at(4, 4))).abs();
    Ok(AdaptedResiduals { a1, a2, a3 })
}

/// The self-dual and anti-self-dual blocks assembled from the adapted
/// second fundamental form:
///
/// ```text
/// mu1(+-) = |a14 +- a23|^2 + |a13 -+ a24|^2
/// mu2(+-) = |a11 - a44|^2 + 4|a13|^2 + 2(|a14||a23| -+ <a14, a23>)
/// mu3(+-) = |a11 - a44|^2 + 4|a14|^2 + 2(|a13||a24| +- <a13, a24>)
/// a1(+-)  = <a23 +- a14, a44 - a11>,  a2(+-) = <a24 -+ a13, a44 - a11>
/// B(+-)   = [[mu1, a1, a2], [a1, mu2, 0], [a2, 0, mu3]]
/// ```
pub fn bw_adapted_closed_form(sff: &Sff) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let res = adapted_residuals(sff)?;
    let scale = 1.0 + sff.norm_sq() + sff.curvature().abs();
    if res.max() > 1e-8 * scale {
        return Err(Error::Precondition(format!(
            "frame is not adapted (residuals a1 {:.2e}, a2 {:.2e}, a3 {:.2e})",
            res.a1, res.a2, res.a3
        )));
    }
    Ok(closed_form_blocks(sff))
}

fn closed_form_blocks(sff: &Sff) -> (DMatrix<f64>, DMatrix<f64>) {
    let a = Alpha4(sff);
    let n2 = |v: &[f64]| dot(v, v);
    let d = vsub(a.at(4, 4), a.at(1, 1));
    let block = |s: f64| {
        let s14 = |sg: f64| -> Vec<f64> { a.at(1, 4).iter().zip(a.at(2, 3)).map(|(x, y)| x + sg * y).collect() };
        let s13 = |sg: f64| -> Vec<f64> { a.at(1, 3).iter().zip(a.at(2, 4)).map(|(x, y)| x + sg * y).collect() };
        let mu1 = n2(&s14(s)) + n2(&s13(-s));
        let mu2 = n2(&d) + 4.0 * n2(a.at(1, 3)) + 2.0 * (norm(a.at(1, 4)) * norm(a.at(2, 3)) - s * dot(a.at(1, 4), a.at(2, 3)));
        let mu3 = n2(&d) + 4.0 * n2(a.at(1, 4)) + 2.0 * (norm(a.at(1, 3)) * norm(a.at(2, 4)) + s * dot(a.at(1, 3), a.at(2, 4)));
        let a1: f64 = a.at(2, 3).iter().zip(a.at(1, 4)).zip(&d).map(|((x, y), z)| (x + s * y) * z).sum();
        let a2: f64 = a.at(2, 4).iter().zip(a.at(1, 3)).zip(&d).map(|((x, y), z)| (x - s * y) * z).sum();
        DMatrix::from_row_slice(3, 3, &[mu1, a1, a2, a1, mu2, 0.0, a2, 0.0, mu3])
    };
    (block(1.0), block(-1.0))
}

/// Which kernel case applies to an adapted second fundamental form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case")]
pub enum KernelCase {
    /// `a14 + a23 = 0 = a13 - a24` and `a1+ = a2+ = 0`.
    PlusI,
    /// `a13 = a24 = 0`, `a23 = a14 != 0`, `a44 - a11 = 2 rho a14`.
    PlusIi { rho: f64 },
    /// `a14 = a23 = 0`, `a24 = -a13 != 0`, `a44 - a11 = 2 rho a13`.
    PlusIii { rho: f64 },
    /// `a14 - a23 = 0 = a13 + a24` and `a1- = a2- = 0`.
    MinusI,
    /// `a13 = a24 = 0`, `a23 = -a14 != 0`, `a44 - a11 = 2 rho a14`.
    MinusIi { rho: f64 },
    /// `a14 = a23 = 0`, `a24 = a13 != 0`, `a44 - a11 = 2 rho a13`.
    MinusIii { rho: f64 },
    /// Kernel present but no listed condition matched within tolerance.
    Unmatched,
}

impl KernelCase {
    pub fn rho(&self) -> Option<f64> {
        match *self {
            KernelCase::PlusIi { rho }
            | KernelCase::PlusIii { rho }
            | KernelCase::MinusIi { rho }
            | KernelCase::MinusIii { rho } => Some(rho),
            _ => None,
        }
    }

    /// Cases that force a flat normal bundle and `1 <= dim N_1 <= 2`.
    pub fn forces_flat_normal_bundle(&self) -> bool {
        self.rho().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub plus_min_eigenvalue: f64,
    pub minus_min_eigenvalue: f64,
    pub plus: Option<KernelCase>,
    pub minus: Option<KernelCase>,
    /// Notes on alternative readings of the case list.
    pub notes: Vec<String>,
}

/// Classify the kernels of the self-dual and anti-self-dual blocks of an
/// adapted second fundamental form.
pub fn classify_kernel(sff: &Sff) -> Result<KernelReport> {
    let (bp, bm) = bw_adapted_closed_form(sff)?;
    let a = Alpha4(sff);
    let scale = 1.0 + sff.norm_sq();
    let tol = STRUCTURE_TOL * scale;
    let vtol = STRUCTURE_TOL * scale.sqrt();
    let small = |v: &[f64]| max_abs(v) <= vtol;
    let d = vsub(a.at(4, 4), a.at(1, 1));
    // rho with d = 2 rho v, or None when v vanishes or d is not parallel.
    let ratio = |v: &[f64]| -> Option<f64> {
        let vv = dot(v, v);
        if vv.sqrt() <= vtol {
            return None;
        }
        let rho = dot(&d, v) / (2.0 * vv);
        let resid: Vec<f64> = d.iter().zip(v).map(|(x, y)| x - 2.0 * rho * y).collect();
        small(&resid).then_some(rho)
    };
    let lp = SymmetricEigen::new(bp.clone()).eigenvalues.min();
    let lm = SymmetricEigen::new(bm.clone()).eigenvalues.min();
    let mut notes = Vec::new();

    let plus = (lp.abs() <= tol).then(|| {
        if small(&vadd(a.at(1, 4), a.at(2, 3))) && small(&vsub(a.at(1, 3), a.at(2, 4))) && bp[(0, 1)].abs() <= tol && bp[(0, 2)].abs() <= tol {
            KernelCase::PlusI
        } else if small(a.at(1, 3)) && small(a.at(2, 4)) && small(&vsub(a.at(2, 3), a.at(1, 4))) {
            ratio(a.at(1, 4)).map_or(KernelCase::Unmatched, |rho| KernelCase::PlusIi { rho })
        } else if small(a.at(1, 4)) && small(a.at(2, 3)) && small(&vadd(a.at(2, 4), a.at(1, 3))) {
            ratio(a.at(1, 3)).map_or(KernelCase::Unmatched, |rho| KernelCase::PlusIii { rho })
        } else {
            KernelCase::Unmatched
        }
    });
    let minus = (lm.abs() <= tol).then(|| {
        if small(&vsub(a.at(1, 4), a.at(2, 3))) && small(&vadd(a.at(1, 3), a.at(2, 4))) && bm[(0, 1)].abs() <= tol && bm[(0, 2)].abs() <= tol {
            KernelCase::MinusI
        } else if small(a.at(1, 3)) && small(a.at(2, 4)) && small(&vadd(a.at(2, 3), a.at(1, 4))) {
            ratio(a.at(1, 4)).map_or(KernelCase::Unmatched, |rho| KernelCase::MinusIi { rho })
        } else if small(a.at(1, 4)) && small(a.at(2, 3)) {
            // The printed third case reads "a24 = a23 != 0", which cannot
            // hold once a23 = 0; the block structure requires a24 = a13.
            if small(&vsub(a.at(2, 4), a.at(1, 3))) {
                if !small(a.at(2, 3)) || small(a.at(2, 4)) {
                    notes.push("minus case iii: literal reading a24 = a23 also holds".into());
                } else {
                    notes.push("minus case iii matched with a24 = a13; the literal reading a24 = a23 != 0 is unsatisfiable here".into());
                }
                ratio(a.at(1, 3)).map_or(KernelCase::Unmatched, |rho| KernelCase::MinusIii { rho })
            } else {
                KernelCase::Unmatched
            }
        } else {
            KernelCase::Unmatched
        }
    });
    Ok(KernelReport { plus_min_eigenvalue: lp, minus_min_eigenvalue: lm, plus, minus, notes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedFrame {
    /// Columns are the adapted frame vectors in the input tangent frame.
    pub frame: DMatrix<f64>,
    /// The second fundamental form in the adapted frame.
    pub sff: Sff,
    pub residuals: AdaptedResiduals,
    /// Rotation angles applied in the planes `(e1, e2)` and `(e3, e4)`.
    pub theta: f64,
    pub phi: f64,
    pub rho: Option<f64>,
    pub kernel: KernelReport,
    /// Lawson–Simons worst-case value of the basis found in the first stage.
    pub ls_value: f64,
}

/// Every shape operator has eigenvalues `l1 = l2 <= l3 = l4`.
pub fn has_two_double_eigenvalues(sff: &Sff) -> bool {
    if sff.n() != 4 {
        return false;
    }
    let m = sff.m();
    let scale = 1.0 + sff.norm_sq().sqrt();
    let mut directions: Vec<Vec<f64>> = (0..m).map(|a| (0..m).map(|b| if a == b { 1.0 } else { 0.0 }).collect()).collect();
    // A few fixed generic combinations catch mixed directions.
    for k in 1..=3 {
        let v: Vec<f64> = (0..m).map(|a| ((a + 1) as f64 * 0.7548776662466927 * k as f64).fract() - 0.5).collect();
        let nv = norm(&v);
        if nv > 0.0 {
            directions.push(v.iter().map(|x| x / nv).collect());
        }
    }
    directions.iter().all(|xi| {
        let mut ev: Vec<f64> = SymmetricEigen::new(shape_matrix(sff, xi)).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        (ev[1] - ev[0]).abs() <= STRUCTURE_TOL * scale && (ev[3] - ev[2]).abs() <= STRUCTURE_TOL * scale
    })
}

/// Residual of the block structure `a11 = a22, a12 = 0, a33 = a44, a34 = 0`.
fn block_residual(sff: &Sff) -> Vec<f64> {
    let a = Alpha4(sff);
    let mut r = vsub(a.at(1, 1), a.at(2, 2));
    r.extend_from_slice(a.at(1, 2));
    r.extend(vsub(a.at(3, 3), a.at(4, 4)));
    r.extend_from_slice(a.at(3, 4));
    r
}

fn cayley(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id - k * 0.5;
    let rhs = &id + k * 0.5;
    lhs.lu().solve(&rhs).expect("I - K/2 is invertible for skew K")
}

fn skew_from(params: &[f64]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(4, 4);
    for (p, &(i, j)) in wedge_pairs(4).iter().enumerate() {
        k[(i, j)] = params[p];
        k[(j, i)] = -params[p];
    }
    k
}

/// Gauss–Newton on the block-structure residual over rotations of the frame.
fn polish_block_structure(sff: &Sff, start: DMatrix<f64>) -> DMatrix<f64> {
    let mut q = start;
    let h = 1e-7;
    for _ in 0..30 {
        let r0 = block_residual(&sff.in_tangent_frame(&q));
        let r0n = max_abs(&r0);
        if r0n < 1e-15 * (1.0 + sff.norm_sq()) {
            break;
        }
        let mut jac = DMatrix::zeros(r0.len(), 6);
        for p in 0..6 {
            let mut e = [0.0; 6];
            e[p] = h;
            let rp = block_residual(&sff.in_tangent_frame(&(&q * cayley(&skew_from(&e)))));
            e[p] = -h;
            let rm = block_residual(&sff.in_tangent_frame(&(&q * cayley(&skew_from(&e)))));
            for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                jac[(row, p)] = (a - b) / (2.0 * h);
            }
        }
        let rhs = -DVector::from_vec(r0);
        let Ok(step) = jac.svd(true, true).solve(&rhs, 1e-10) else { break };
        let candidate = &q * cayley(&skew_from(step.as_slice()));
        let r1 = max_abs(&block_residual(&sff.in_tangent_frame(&candidate)));
        if r1 >= r0n {
            break;
        }
        q = reorthonormalize(candidate);
    }
    q
}

fn reorthonormalize(q: DMatrix<f64>) -> DMatrix<f64> {
    frameopt::gram_schmidt(q)
}

/// Find an oriented orthonormal frame satisfying the adapted-frame
/// conditions.
///
/// Stage one maximises the Lawson–Simons quantity (`p = 2`) over frames to
/// reach an equality basis, then polishes the resulting block structure by
/// Gauss–Newton. Stage two rotates within `span{e1, e2}` and `span{e3, e4}`
/// by angles `theta = (s1 - s2)/4`, `phi = (s1 + s2)/4`, where `s1` and `s2`
/// solve
///
/// ```text
/// 2 cos s1 <P, Q> + sin s1 (|Q|^2 - |P|^2) = 0,   P = a14 + a23, Q = a24 - a13
/// 2 cos s2 <U, V> + sin s2 (|V|^2 - |U|^2) = 0,   U = a13 + a24, V = a14 - a23
/// ```
pub fn adapted_frame(sff: &Sff, settings: &FrameSettings) -> Result<AdaptedFrame> {
    if sff.n() != 4 {
        return Err(Error::Dimension(format!("adapted frames need n = 4, got {}", sff.n())));
    }
    if !has_two_double_eigenvalues(sff) {
        return Err(Error::NotEqualityCase("a shape operator does not have two double eigenvalues".into()));
    }
    let scale = 1.0 + sff.norm_sq() + sff.curvature().abs();
    let c = sff.curvature();
    let tol = ADAPTED_TOL * scale;

    let id = DMatrix::<f64>::identity(4, 4);
    let (mut q, ls_value) = if max_abs(&block_residual(sff)) <= 1e-12 * scale {
        (id, pinch::ls_value_in_frame(sff, 2, c))
    } else {
        let report = pinch::ls_min(sff, 2, c, settings)?;
        if report.value < -STRUCTURE_TOL * scale {
            return Err(Error::NoAdaptedBasis(report.value));
        }
        (polish_block_structure(sff, report.basis.clone()), report.value)
    };
    if q.determinant() < 0.0 {
        q.swap_columns(0, 1);
    }
    let base = sff.in_tangent_frame(&q);
    if max_abs(&block_residual(&base)) > tol {
        return Err(Error::NoAdaptedBasis(max_abs(&block_residual(&base))));
    }

    let a = Alpha4(&base);
    let p = vadd(a.at(1, 4), a.at(2, 3));
    let qv = vsub(a.at(2, 4), a.at(1, 3));
    let u = vadd(a.at(1, 3), a.at(2, 4));
    let v = vsub(a.at(1, 4), a.at(2, 3));
    let s1 = (-2.0 * dot(&p, &qv)).atan2(dot(&qv, &qv) - dot(&p, &p));
    let s2 = (-2.0 * dot(&u, &v)).atan2(dot(&v, &v) - dot(&u, &u));
    let phi = (s1 + s2) / 4.0;
    let theta = (s1 - s2) / 4.0;
    let rot = plane_rotations(theta, phi);
    let frame = &q * &rot;
    let adapted = sff.in_tangent_frame(&frame);
    let residuals = adapted_residuals(&adapted)?;
    if residuals.a1 > tol || residuals.a2 > tol {
        return Err(Error::NoAdaptedBasis(residuals.max()));
    }
    if residuals.a3 > tol {
        return Err(Error::NotEqualityCase(format!("condition a3 fails by {:.3e}", residuals.a3)));
    }
    let kernel = classify_kernel(&adapted)?;
    let rho = kernel.plus.as_ref().and_then(KernelCase::rho).or_else(|| kernel.minus.as_ref().and_then(KernelCase::rho));
    Ok(AdaptedFrame { frame, sff: adapted, residuals, theta, phi, rho, kernel, ls_value })
}

/// Block rotation by `theta` in the `(e1, e2)` plane and `phi` in the
/// `(e3, e4)` plane: `e1' = cos t e1 + sin t e2`, `e2' = -sin t e1 + cos t e2`.
pub fn plane_rotations(theta: f64, phi: f64) -> DMatrix<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    DMatrix::from_row_slice(4, 4, &[ct, -st, 0.0, 0.0, st, ct, 0.0, 0.0, 0.0, 0.0, cp, -sp, 0.0, 0.0, sp, cp])
}

// ---------------------------------------------------------------------------
// Dupin principal normals

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DupinReport {
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    /// Orthonormal bases (columns) of the eigendistributions.
    pub e1: DMatrix<f64>,
    pub e2: DMatrix<f64>,
    pub inner: f64,
}

/// Simultaneous block-diagonalisation of the shape operators into two
/// umbilic eigenspaces of equal dimension.
pub fn dupin_decomposition(sff: &Sff) -> Result<DupinReport> {
    let n = sff.n();
    let m = sff.m();
    let nc = normal_curvature(sff);
    if !nc.flat {
        return Err(Error::NotSimultaneouslyDiagonalizable(format!("normal curvature {:.3e}", nc.max_abs)));
    }
    let inv = invariants(sff);
    let scale = 1.0 + inv.s;
    if inv.traceless_sq <= 1e-12 * scale {
        return Err(Error::Umbilical);
    }
    let weights: Vec<f64> = (0..m).map(|a| 1.0 + ((a + 1) as f64 * 0.6180339887498949).fract()).collect();
    let generic = shape_matrix(sff, &weights);
    let eig = SymmetricEigen::new(generic);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let tol = STRUCTURE_TOL * scale.sqrt();
    let mut clusters: Vec<Vec<usize>> = vec![vec![order[0]]];
    for w in order.windows(2) {
        if eig.eigenvalues[w[1]] - eig.eigenvalues[w[0]] > tol {
            clusters.push(vec![w[1]]);
        } else {
            clusters.last_mut().expect("nonempty").push(w[1]);
        }
    }
    if clusters.len() != 2 || clusters[0].len() * 2 != n {
        return Err(Error::Precondition(format!(
            "expected two eigenspaces of dimension {}, found multiplicities {:?}",
            n / 2,
            clusters.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let basis = |idx: &[usize]| DMatrix::from_columns(&idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    let e1 = basis(&clusters[0]);
    let e2 = basis(&clusters[1]);
    let mut etas = [vec![0.0; m], vec![0.0; m]];
    for a in 0..m {
        let mut xi = vec![0.0; m];
        xi[a] = 1.0;
        let sh = shape_matrix(sff, &xi);
        for (k, e) in [&e1, &e2].into_iter().enumerate() {
            let block = e.transpose() * &sh * e;
            let lam = block.trace() / block.nrows() as f64;
            let dev = (&block - DMatrix::<f64>::identity(block.nrows(), block.nrows()) * lam).amax();
            if dev > tol {
                return Err(Error::Precondition(format!("shape operator {a} is not umbilic on eigenspace {k} ({dev:.2e})")));
            }
            etas[k][a] = lam;
        }
        let cross = (e1.transpose() * &sh * &e2).amax();
        if cross > tol {
            return Err(Error::NotSimultaneouslyDiagonalizable(format!("off-diagonal block {cross:.2e}")));
        }
    }
    let [eta1, eta2] = etas;
    let inner = dot(&eta1, &eta2);
    Ok(DupinReport { eta1, eta2, e1, e2, inner })
}

/// Random second fundamental form satisfying (a1)-(a3), built from
/// mutually constrained vectors P, Q, U, V.
pub fn random_adapted<R: rand::Rng>(r: &mut R, m: usize, c: f64) -> Sff {
    fn gauss(r: &mut impl rand::Rng, m: usize) -> DVector<f64> {
        DVector::from_fn(m, |_, _| r.sample(rand_distr::StandardNormal))
    }
    let g = |r: &mut R| gauss(r, m);
    let proj_out = |v: DVector<f64>, basis: &[&DVector<f64>]| {
        let mut v = v;
        for b in basis {
            let nb = b.norm_squared();
            if nb > 0.0 {
                v -= *b * (b.dot(&v) / nb);
            }
        }
        v
    };
    let p = g(r);
    let q = proj_out(g(r), &[&p]);
    let u = proj_out(g(r), &[&q]);
    let u_perp = proj_out(u.clone(), &[&p]);
    let u_perp = if u_perp.norm() > 1e-8 * u.norm() { u_perp } else { DVector::zeros(m) };
    let v = proj_out(proj_out(g(r), &[&p]), &[&u_perp]);
    let lam = (&p + &q) / 2.0;
    let mu = (&p - &q) / 2.0;
    let kap = (&u + &v) / 2.0;
    let nu = (&u - &v) / 2.0;
    let rho = g(r);
    let mut sig = g(r);
    let t = kap.norm_squared() + lam.norm_squared() - c;
    sig += &rho * ((t - rho.dot(&sig)) / rho.norm_squared());
    let mut s = Sff::zeros(4, m, c);
    s.set(0, 0, rho.as_slice());
    s.set(1, 1, rho.as_slice());
    s.set(2, 2, sig.as_slice());
    s.set(3, 3, sig.as_slice());
    s.set(0, 2, kap.as_slice());
    s.set(0, 3, lam.as_slice());
    s.set(1, 2, mu.as_slice());
    s.set(1, 3, nu.as_slice());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frameopt::{haar_orthogonal, rng};
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn bivector_form_matches_contraction() {
        let mut g = rng(3, 0);
        for n in [4, 5] {
            let r = gauss_curvature(&crate::pinch::random_sff(&mut g, n, 3, 1.0));
            let form = BivectorForm::new(&r);
            for _ in 0..20 {
                let frame = haar_orthogonal(n, &mut g).columns(0, 4).into_owned();
                assert!((form.isotropic(&frame) - isotropic_unchecked(&r, &frame)).abs() < 1e-12);
            }
        }
    }

    fn unit_s4() -> Sff {
        Sff::umbilical(4, &[1.0], 0.0)
    }

    /// Minimal S^2(1/sqrt2) x S^2(1/sqrt2) in S^5: principal curvatures 1, -1.
    fn clifford22() -> Sff {
        Sff::from_fn(4, 1, 1.0, |i, j, _| if i != j { 0.0 } else if i < 2 { 1.0 } else { -1.0 })
    }

    fn random_sff(r: &mut impl Rng, n: usize, m: usize, c: f64) -> Sff {
        Sff::from_fn(n, m, c, |_, _, _| r.sample(StandardNormal))
    }

    #[test]
    fn totally_geodesic_in_sphere() {
        let r = gauss_curvature(&Sff::zeros(4, 2, 1.0));
        assert_eq!(r.get(0, 1, 1, 0), 1.0);
        assert_eq!(r.sectional(2, 3), 1.0);
    }

    #[test]
    fn unit_four_sphere() {
        let r = gauss_curvature(&unit_s4());
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(r.sectional(i, j), 1.0);
                }
            }
        }
        let ric = ricci_scalar(&r);
        assert!((ric.ric.clone() - DMatrix::<f64>::identity(4, 4) * 3.0).amax() < 1e-15);
        assert_eq!(ric.scalar, 12.0);
        let bw = bw_operator(&r, &ric);
        assert!((bw.matrix.clone() - DMatrix::<f64>::identity(6, 6) * 4.0).amax() < 1e-15);
        let (bp, bm) = hodge_split(&bw, Orientation::Positive).unwrap();
        assert!((bp - DMatrix::<f64>::identity(3, 3) * 4.0).amax() < 1e-14);
        assert!((bm - DMatrix::<f64>::identity(3, 3) * 4.0).amax() < 1e-14);
        let mut rng = rng(3, 0);
        let q = haar_orthogonal(4, &mut rng);
        assert!((isotropic_curvature(&r, &q).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flat_is_zero() {
        let r = gauss_curvature(&Sff::zeros(4, 1, 0.0));
        let ric = ricci_scalar(&r);
        assert_eq!(ric.scalar, 0.0);
        assert_eq!(bw_operator(&r, &ric).matrix.amax(), 0.0);
        assert_eq!(isotropic_curvature(&r, &DMatrix::identity(4, 4)).unwrap(), 0.0);
    }

    #[test]
    fn clifford_product() {
        let sff = clifford22();
        let r = gauss_curvature(&sff);
        assert_eq!(r.sectional(0, 1), 2.0);
        assert_eq!(r.sectional(2, 3), 2.0);
        assert_eq!(r.sectional(0, 2), 0.0);
        assert_eq!(r.sectional(1, 3), 0.0);
        let ric = ricci_scalar(&r);
        assert!((ric.ric.clone() - DMatrix::<f64>::identity(4, 4) * 2.0).amax() < 1e-15);
        assert_eq!(ric.scalar, 8.0);
        let bw = bw_operator(&r, &ric);
        let ev = bw.eigenvalues();
        let expected = [0.0, 0.0, 4.0, 4.0, 4.0, 4.0];
        assert!(ev.iter().zip(expected).all(|(a, b)| (a - b).abs() < 1e-12), "{ev:?}");
        let (bp, bm) = hodge_split(&bw, Orientation::Positive).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 4.0, 4.0]));
        assert!((bp - &d).amax() < 1e-14);
        assert!((bm - &d).amax() < 1e-14);
        // frame split across the factors: e1, e2 from the first, e3, e4 from the second
        assert_eq!(isotropic_curvature(&r, &DMatrix::identity(4, 4)).unwrap().abs(), 0.0);
        let (cp, cm) = bw_adapted_closed_form(&sff).unwrap();
        assert!((cp - &d).amax() < 1e-14 && (cm - &d).amax() < 1e-14);
    }

    #[test]
    fn hodge_star_properties() {
        for o in [Orientation::Positive, Orientation::Negative] {
            let s = hodge_star(o);
            assert_eq!((&s * &s - DMatrix::<f64>::identity(6, 6)).amax(), 0.0);
            let e = eta_basis(o);
            assert!((&e * e.transpose() - DMatrix::<f64>::identity(6, 6)).amax() < 1e-15);
            for k in 0..6 {
                let row = e.row(k).transpose();
                let sign = if k < 3 { 1.0 } else { -1.0 };
                assert!((&s * &row - &row * sign).amax() < 1e-15);
            }
        }
        let mut r = rng(11, 0);
        for _ in 0..50 {
            let m = r.gen_range(1..=4);
            let c = r.gen_range(0..2) as f64;
            let bw = bw_from_sff(&random_sff(&mut r, 4, m, c));
            assert!(star_commutator(&bw).unwrap() <= 1e-10);
            assert!((&bw.matrix - bw.matrix.transpose()).amax() == 0.0);
        }
        let bw5 = bw_from_sff(&Sff::zeros(5, 1, 0.0));
        assert!(hodge_split(&bw5, Orientation::Positive).is_err());
    }

    #[test]
    fn bianchi_and_symmetries_are_exact() {
        let mut r = rng(5, 0);
        for n in [2, 3, 4, 5] {
            let t = gauss_curvature(&random_sff(&mut r, n, 3, 1.0));
            assert!(t.symmetry_residual() <= 1e-12);
        }
    }

    #[test]
    fn isotropic_is_bw_form_on_frame_bivector() {
        let mut r = rng(7, 0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for _ in 0..200 {
            let m = r.gen_range(1..=4);
            let c = r.gen_range(0..2) as f64;
            let sff = random_sff(&mut r, 4, m, c);
            let q = haar_orthogonal(4, &mut r);
            let t = gauss_curvature(&sff);
            let iso = isotropic_curvature(&t, &q).unwrap();
            let rf = t.in_frame(&q);
            let bw = bw_operator(&rf, &ricci_scalar(&rf));
            let mut omega = DVector::zeros(6);
            omega[0] = h;
            omega[5] = -h;
            let form = omega.dot(&(&bw.matrix * &omega));
            assert!((iso - form).abs() <= 1e-10 * (1.0 + iso.abs()), "{iso} {form}");
        }
    }

    #[test]
    fn isotropic_minimum_reaches_eigenvalue() {
        let mut r = rng(8, 0);
        let settings = FrameSettings { restarts: 1, seed: 4, ..FrameSettings::default() };
        for _ in 0..20 {
            let sff = random_sff(&mut r, 4, 2, 1.0);
            let t = gauss_curvature(&sff);
            let lmin = bw_from_sff(&sff).min_eigenvalue();
            let found = isotropic_min(&t, 50, &settings, None).unwrap();
            assert!(found.value >= lmin - 1e-9);
            assert!(found.value <= lmin + 1e-6, "{} vs {}", found.value, lmin);
        }
    }

    #[test]
    fn seed_frame_realises_eigenvector() {
        let mut r = rng(9, 0);
        let sff = random_sff(&mut r, 4, 3, 0.0);
        let bw = bw_from_sff(&sff);
        let eig = SymmetricEigen::new(bw.matrix.clone());
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k).into_owned();
        // project onto the self-dual or anti-self-dual part it lives in
        let s = hodge_star(Orientation::Positive);
        let sd = (&v + &s * &v) / 2.0;
        let asd = (&v - &s * &v) / 2.0;
        let omega = if sd.norm() > asd.norm() { sd.normalize() } else { asd.normalize() };
        let f = isotropic_seed_frame(&omega).unwrap();
        let iso = isotropic_curvature(&gauss_curvature(&sff), &f).unwrap();
        assert!((iso - omega.dot(&(&bw.matrix * &omega))).abs() < 1e-10);
    }

    #[test]
    fn non_orthonormal_frame_rejected() {
        let t = gauss_curvature(&unit_s4());
        let mut f = DMatrix::<f64>::identity(4, 4);
        f[(0, 1)] = 1e-6;
        assert!(matches!(isotropic_curvature(&t, &f), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn closed_form_matches_generic_pipeline() {
        let mut r = rng(13, 0);
        for _ in 0..200 {
            let m = r.gen_range(2..=5);
            let c = r.gen_range(0..2) as f64;
            let sff = random_adapted(&mut r, m, c);
            let res = adapted_residuals(&sff).unwrap();
            assert!(res.max() < 1e-12 * (1.0 + sff.norm_sq()), "{res:?}");
            let (cp, cm) = bw_adapted_closed_form(&sff).unwrap();
            let (bp, bm) = hodge_split(&bw_from_sff(&sff), Orientation::Positive).unwrap();
            assert!((cp - bp).amax() <= 1e-10);
            assert!((cm - bm).amax() <= 1e-10);
        }
        let zero = Sff::zeros(4, 2, 0.0);
        let (cp, cm) = bw_adapted_closed_form(&zero).unwrap();
        assert_eq!(cp.amax() + cm.amax(), 0.0);
        assert!(matches!(bw_adapted_closed_form(&random_sff(&mut r, 4, 2, 0.0)), Err(Error::Precondition(_))));
    }

    #[test]
    fn rotation_identities() {
        let mut r = rng(17, 0);
        for _ in 0..100 {
            let sff = random_sff(&mut r, 4, 3, 0.0);
            let (theta, phi): (f64, f64) = (r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0));
            let t = sff.in_tangent_frame(&plane_rotations(theta, phi));
            let a = Alpha4(&sff);
            let b = Alpha4(&t);
            let (sp, cp) = (phi + theta).sin_cos();
            let (sm, cm) = (phi - theta).sin_cos();
            let p = vadd(a.at(1, 4), a.at(2, 3));
            let q = vsub(a.at(2, 4), a.at(1, 3));
            let u = vadd(a.at(1, 3), a.at(2, 4));
            let v = vsub(a.at(1, 4), a.at(2, 3));
            let lin = |x: &[f64], sx: f64, y: &[f64], sy: f64| -> Vec<f64> { x.iter().zip(y).map(|(a, b)| sx * a + sy * b).collect() };
            let checks = [
                (vadd(b.at(1, 4), b.at(2, 3)), lin(&p, cp, &q, sp)),
                (vsub(b.at(2, 4), b.at(1, 3)), lin(&p, -sp, &q, cp)),
                (vadd(b.at(1, 3), b.at(2, 4)), lin(&u, cm, &v, sm)),
                (vsub(b.at(1, 4), b.at(2, 3)), lin(&u, -sm, &v, cm)),
            ];
            for (lhs, rhs) in checks {
                assert!(max_abs(&vsub(&lhs, &rhs)) <= 1e-12);
            }
        }
    }

    #[test]
    fn kernel_case_plus_ii() {
        // a13 = a24 = 0, a23 = a14 = v, a44 - a11 = 2 rho v
        let rho = 0.7;
        let c = 0.0;
        let v = [0.6, 0.8, 0.0];
        let a11 = [0.3, -0.1, 0.5];
        // (a3): |v|^2 = c + <a11, a44>; choose a44 = a11 + 2 rho v and fix via a third component
        let mut a44: Vec<f64> = a11.iter().zip(&v).map(|(x, y)| x + 2.0 * rho * y).collect();
        let need = 1.0 - c - dot(&a11, &a44);
        // adjust along a direction orthogonal to v keeping a44 - a11 parallel to v:
        // move a11 and a44 together by w with w orthogonal to v
        let w = [0.0, 0.0, 1.0];
        // <a11 + t w, a44 + t w> = <a11, a44> + t(<a11,w> + <a44,w>) + t^2
        let (b, cc) = (dot(&a11, &w) + dot(&a44, &w), -need);
        let t = (-b + (b * b - 4.0 * cc).sqrt()) / 2.0;
        let a11: Vec<f64> = a11.iter().zip(&w).map(|(x, y)| x + t * y).collect();
        a44 = a44.iter().zip(&w).map(|(x, y)| x + t * y).collect();
        let mut s = Sff::zeros(4, 3, c);
        s.set(0, 0, &a11);
        s.set(1, 1, &a11);
        s.set(2, 2, &a44);
        s.set(3, 3, &a44);
        s.set(0, 3, &v);
        s.set(1, 2, &v);
        let (bp, _) = bw_adapted_closed_form(&s).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, rho, 0.0, rho, rho * rho, 0.0, 0.0, 0.0, rho * rho + 1.0]) * 4.0;
        assert!((bp - expected).amax() < 1e-12);
        let rep = classify_kernel(&s).unwrap();
        match rep.plus {
            Some(KernelCase::PlusIi { rho: r }) => assert!((r - rho).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(normal_curvature(&s).flat);
        let fnd = invariants(&s).first_normal_dim;
        assert!((1..=2).contains(&fnd));
    }

    #[test]
    fn kernel_case_minus_iii_uses_corrected_reading() {
        // a14 = a23 = 0, a24 = a13 = v, a44 - a11 = 2 rho v, with (a3).
        let rho = -0.4;
        let v = [1.0, 0.0];
        let a11 = [0.0, 1.2];
        let a44: Vec<f64> = a11.iter().zip(&v).map(|(x, y)| x + 2.0 * rho * y).collect();
        let c = dot(&v, &v) - dot(&a11, &a44);
        let mut s = Sff::zeros(4, 2, c);
        s.set(0, 0, &a11);
        s.set(1, 1, &a11);
        s.set(2, 2, &a44);
        s.set(3, 3, &a44);
        s.set(0, 2, &v);
        s.set(1, 3, &v);
        let rep = classify_kernel(&s).unwrap();
        assert!(matches!(rep.minus, Some(KernelCase::MinusIii { rho: r }) if (r - rho).abs() < 1e-12), "{rep:?}");
        assert!(!rep.notes.is_empty());
        assert!(normal_curvature(&s).flat);
    }

    #[test]
    fn normal_curvature_cases() {
        let mut r = rng(19, 0);
        assert!(normal_curvature(&random_sff(&mut r, 4, 1, 0.0)).flat);
        // diagonal shape operators commute
        let diag = Sff::from_fn(4, 2, 0.0, |i, j, a| if i == j { [[1.0, 2.0, 0.5, -1.0], [0.3, 0.0, 2.0, 1.0]][a][i] } else { 0.0 });
        assert!(normal_curvature(&diag).flat);
        let generic = random_sff(&mut r, 4, 3, 0.0);
        let nc = normal_curvature(&generic);
        assert!(!nc.flat);
        let c01 = nc.component(0, 1);
        assert!((&c01 + nc.component(1, 0)).amax() == 0.0);
        // skew in the normal indices as well
        assert!((&c01 + c01.transpose()).amax() < 1e-12);
    }

    #[test]
    fn dupin_cases() {
        let d = dupin_decomposition(&clifford22()).unwrap();
        assert!((d.inner + 1.0).abs() < 1e-12);
        assert!(matches!(dupin_decomposition(&unit_s4()), Err(Error::Umbilical)));
        let mut r = rng(23, 0);
        assert!(matches!(
            dupin_decomposition(&random_sff(&mut r, 4, 3, 0.0)),
            Err(Error::NotSimultaneouslyDiagonalizable(_))
        ));
    }

    #[test]
    fn adapted_frame_round_trip() {
        let settings = FrameSettings { restarts: 4, seed: 1, ..FrameSettings::default() };
        // already adapted: returned unchanged
        let sff = clifford22();
        let af = adapted_frame(&sff, &settings).unwrap();
        assert!((af.frame.clone() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-15);
        assert_eq!(af.residuals.max(), 0.0);
        // rotated copy
        let mut r = rng(29, 0);
        for _ in 0..5 {
            let mut q = haar_orthogonal(4, &mut r);
            if q.determinant() < 0.0 {
                q.swap_columns(0, 1);
            }
            let rotated = sff.in_tangent_frame(&q);
            let af = adapted_frame(&rotated, &settings).unwrap();
            assert!(af.residuals.max() <= 1e-9, "{:?}", af.residuals);
            assert!(af.frame.determinant() > 0.0);
        }
        let mut rr = rng(31, 0);
        assert!(matches!(adapted_frame(&random_sff(&mut rr, 4, 2, 0.0), &settings), Err(Error::NotEqualityCase(_))));
    }
}
