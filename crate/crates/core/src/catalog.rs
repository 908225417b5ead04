//! Model immersions with closed-form 2-jets, and the example constructors
//! built on them.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::curvature::gauss_curvature;
use crate::dsl::{self, ExprAst};
use crate::engine::{frames_at, invariants, pair_index, sff_at, shape_matrix, AmbientSpace, Chart, Coord, Jet2, ParamDomain, Sff};
use crate::multijet::{hyperspherical, MultiJet};
use crate::pinch::pinch_bound;
use crate::{Error, Result};

/// Keeps hyperspherical charts away from their coordinate singularities.
const POLE_MARGIN: f64 = 0.15;

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    /// One expression per ambient coordinate, all in the same variable.
    pub components: Vec<String>,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    /// In `R^(2k+2)`, inside the sphere of radius `R`.
    #[default]
    Euclidean,
    /// Lifted into the unit sphere by `x -> (x, sqrt(1 - R^2))`.
    Sphere,
}

/// A catalog model: `{"id": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", content = "params", rename_all = "snake_case")]
pub enum ModelSpec {
    RoundSphere {
        n: usize,
        #[serde(default = "one")]
        radius: f64,
    },
    /// `S^k(r) x S^(n-k)(sqrt(1 - r^2))` in the unit sphere `S^(n+1)`.
    CliffordTorus { n: usize, k: usize, r: f64 },
    /// `S^k(r) x S^k(sqrt(R^2 - r^2))`.
    SphereProduct {
        #[serde(default = "two")]
        k: usize,
        r: f64,
        #[serde(rename = "R")]
        big_r: f64,
        #[serde(default)]
        placement: Placement,
    },
    /// Standard minimal embedding of the complex projective plane into the
    /// sphere of radius `r` in the traceless Hermitian 3x3 matrices.
    Cp2Veronese { r: f64 },
    /// `sum x_i^2 / a_i^2 = 1` with `0 < a_1 <= ... <= a_(n+1)`.
    Ellipsoid { axes: Vec<f64> },
    /// Rotation of the graph of `profile` about the `x_1` axis in `R^(n+1)`.
    Rotational { n: usize, profile: String, lo: f64, hi: f64 },
    Curve(CurveSpec),
    /// `gamma x g` with `g` a Euclidean model.
    ProductWithCurve { curve: CurveSpec, g: Box<ModelSpec>, ell: usize },
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::RoundSphere { .. } => "round_sphere",
            ModelSpec::CliffordTorus { .. } => "clifford_torus",
            ModelSpec::SphereProduct { .. } => "sphere_product",
            ModelSpec::Cp2Veronese { .. } => "cp2_veronese",
            ModelSpec::Ellipsoid { .. } => "ellipsoid",
            ModelSpec::Rotational { .. } => "rotational",
            ModelSpec::Curve(_) => "curve",
            ModelSpec::ProductWithCurve { .. } => "product_with_curve",
        }
    }
}

fn param(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Parameter(msg()))
    }
}

/// Angles for `S^d`: `d - 1` polar angles away from the poles, then a circle.
fn sphere_coords(d: usize) -> Vec<Coord> {
    let mut c: Vec<Coord> = (0..d.saturating_sub(1)).map(|_| Coord::interval(POLE_MARGIN, PI - POLE_MARGIN)).collect();
    if d >= 1 {
        c.push(Coord::circle());
    }
    c
}

fn scaled(v: Vec<MultiJet>, s: f64) -> Vec<MultiJet> {
    v.into_iter().map(|x| x.scale(s)).collect()
}

pub fn build_model(spec: &ModelSpec) -> Result<Chart> {
    match spec {
        &ModelSpec::RoundSphere { n, radius } => {
            param(n >= 1, || format!("round_sphere needs n >= 1, got {n}"))?;
            param(radius > 0.0, || format!("radius must be positive, got {radius}"))?;
            Chart::from_multijet(
                format!("round_sphere(n={n}, R={radius})"),
                AmbientSpace::euclidean(n + 1),
                ParamDomain::new(sphere_coords(n)),
                move |v| Ok(scaled(hyperspherical(v), radius)),
            )
        }
        &ModelSpec::CliffordTorus { n, k, r } => {
            param(n >= 2 && k >= 1 && k < n, || format!("clifford_torus needs 1 <= k <= n-1, got n = {n}, k = {k}"))?;
            param(r > 0.0 && r < 1.0, || format!("clifford_torus needs 0 < r < 1, got {r}"))?;
            let s = (1.0 - r * r).sqrt();
            let mut coords = sphere_coords(k);
            coords.extend(sphere_coords(n - k));
            Chart::from_multijet(
                format!("clifford_torus(n={n}, k={k}, r={r})"),
                AmbientSpace::unit_sphere(n + 1),
                ParamDomain::new(coords),
                move |v| {
                    let mut x = scaled(hyperspherical(&v[..k]), r);
                    x.extend(scaled(hyperspherical(&v[k..]), s));
                    Ok(x)
                },
            )
        }
        &ModelSpec::SphereProduct { k, r, big_r, placement } => {
            param(k >= 1, || "sphere_product needs k >= 1".into())?;
            param(r > 0.0 && r < big_r, || format!("sphere_product needs 0 < r < R, got r = {r}, R = {big_r}"))?;
            let s = (big_r * big_r - r * r).sqrt();
            let lift = match placement {
                Placement::Euclidean => None,
                Placement::Sphere => {
                    param(big_r < 1.0, || format!("lifting into the unit sphere needs R < 1, got {big_r}"))?;
                    Some((1.0 - big_r * big_r).sqrt())
                }
            };
            let ambient = match lift {
                None => AmbientSpace::euclidean(2 * k + 2),
                Some(_) => AmbientSpace::unit_sphere(2 * k + 2),
            };
            let mut coords = sphere_coords(k);
            coords.extend(sphere_coords(k));
            Chart::from_multijet(format!("sphere_product(k={k}, r={r}, R={big_r})"), ambient, ParamDomain::new(coords), move |v| {
                let n = v.len();
                let mut x = scaled(hyperspherical(&v[..k]), r);
                x.extend(scaled(hyperspherical(&v[k..]), s));
                if let Some(h) = lift {
                    x.push(MultiJet::constant(n, h));
                }
                Ok(x)
            })
        }
        &ModelSpec::Cp2Veronese { r } => {
            param(r > 0.0, || format!("cp2_veronese needs r > 0, got {r}"))?;
            Chart::from_multijet(
                format!("cp2_veronese(r={r})"),
                AmbientSpace::sphere(7, r)?,
                ParamDomain::new(vec![Coord::interval(-1.5, 1.5); 4]),
                move |v| Ok(veronese(v, r)),
            )
        }
        ModelSpec::Ellipsoid { axes } => {
            let axes = axes.clone();
            param(axes.len() >= 3, || "ellipsoid needs at least three semi-axes".into())?;
            param(axes[0] > 0.0 && axes.windows(2).all(|w| w[0] <= w[1]), || {
                format!("ellipsoid needs 0 < a_1 <= ... <= a_(n+1), got {axes:?}")
            })?;
            let n = axes.len() - 1;
            // a_2..a_n, then a_(n+1), then a_1: both extreme axes land on
            // regular points of the angle chart.
            let mut order: Vec<f64> = axes[1..n].to_vec();
            order.push(axes[n]);
            order.push(axes[0]);
            Chart::from_multijet(
                format!("ellipsoid(axes={axes:?})"),
                AmbientSpace::euclidean(n + 1),
                ParamDomain::new(sphere_coords(n)),
                move |v| Ok(hyperspherical(v).into_iter().zip(&order).map(|(y, a)| y.scale(*a)).collect()),
            )
        }
        ModelSpec::Rotational { n, profile, lo, hi } => {
            let (n, lo, hi) = (*n, *lo, *hi);
            param(n >= 2, || format!("rotational needs n >= 2, got {n}"))?;
            param(lo < hi, || format!("empty profile interval [{lo}, {hi}]"))?;
            let ast = dsl::parse(profile)?;
            for i in 0..=200 {
                let x = lo + (hi - lo) * i as f64 / 200.0;
                let u = ast.eval(x)?;
                param(u > 0.0, || format!("profile is not positive at x = {x} (u = {u})"))?;
            }
            let mut coords = vec![Coord::interval(lo, hi)];
            coords.extend(sphere_coords(n - 1));
            Chart::from_multijet(format!("rotational(n={n}, u={profile})"), AmbientSpace::euclidean(n + 1), ParamDomain::new(coords), move |v| {
                let u = v[0].compose(ast.eval_jet2(v[0].value)?);
                let mut x = vec![v[0].clone()];
                x.extend(hyperspherical(&v[1..]).into_iter().map(|w| &w * &u));
                Ok(x)
            })
        }
        ModelSpec::Curve(c) => curve_chart(c),
        ModelSpec::ProductWithCurve { curve, g, ell } => {
            let (chart, _) = product_with_curve(&curve_chart(curve)?, &build_model(g)?, *ell, &ProductOptions::default())?;
            Ok(chart)
        }
    }
}

fn veronese(v: &[MultiJet], r: f64) -> Vec<MultiJet> {
    let n = v.len();
    let re = [MultiJet::constant(n, 1.0), v[0].clone(), v[2].clone()];
    let im = [MultiJet::constant(n, 0.0), v[1].clone(), v[3].clone()];
    let w = re.iter().chain(&im).fold(MultiJet::constant(n, 0.0), |acc, x| &acc + &x.square());
    let inv = w.recip();
    // z_p conj(z_q) / |z|^2
    let entry = |p: usize, q: usize| {
        let real = &(&re[p] * &re[q]) + &(&im[p] * &im[q]);
        let imag = &(&im[p] * &re[q]) - &(&re[p] * &im[q]);
        (&real * &inv, &imag * &inv)
    };
    let s = r * 1.5f64.sqrt();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let d: Vec<MultiJet> = (0..3).map(|p| entry(p, p).0).collect();
    let mut out = vec![(&d[0] - &d[1]).scale(h * s), (&(&d[0] + &d[1]) - &d[2].scale(2.0)).scale(s / 6f64.sqrt())];
    for (p, q) in [(0, 1), (0, 2), (1, 2)] {
        let (a, b) = entry(p, q);
        out.push(a.scale(std::f64::consts::SQRT_2 * s));
        out.push(b.scale(std::f64::consts::SQRT_2 * s));
    }
    out
}

/// Holomorphic sectional curvature of the plane `{d/dx_1, d/dy_1}` of the
/// complex chart `z = (1, x_1 + i y_1, x_2 + i y_2)`, at `u`.
pub fn cp2_holomorphic_curvature(r: f64, u: &[f64]) -> Result<f64> {
    let chart = build_model(&ModelSpec::Cp2Veronese { r })?;
    let (fp, sff) = sff_at(&chart, u)?;
    let jet = chart.jet(u)?;
    let x: Vec<f64> = (0..4).map(|a| fp.tangent.column(a).iter().zip(jet.first(0)).map(|(p, q)| p * q).sum()).collect();
    let y: Vec<f64> = (0..4).map(|a| fp.tangent.column(a).iter().zip(jet.first(1)).map(|(p, q)| p * q).sum()).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let area = dot(&x, &x) * dot(&y, &y) - dot(&x, &y).powi(2);
    Ok(gauss_curvature(&sff).contract(&x, &y, &y, &x) / area)
}

fn curve_asts(c: &CurveSpec) -> Result<Vec<ExprAst>> {
    param(c.components.len() >= 2, || "a curve needs at least two components".into())?;
    param(c.lo < c.hi, || format!("empty curve interval [{}, {}]", c.lo, c.hi))?;
    let first = dsl::parse(&c.components[0])?;
    let var = first.var.clone();
    let mut asts = vec![first];
    for s in &c.components[1..] {
        let ast = match &var {
            Some(v) => dsl::parse_with_var(s, v)?,
            None => dsl::parse(s)?,
        };
        if let (Some(a), Some(b)) = (&var, &ast.var) {
            param(a == b, || format!("curve components use different variables {a} and {b}"))?;
        }
        asts.push(ast);
    }
    Ok(asts)
}

fn curve_chart(c: &CurveSpec) -> Result<Chart> {
    let asts = curve_asts(c)?;
    let d = asts.len();
    Chart::new(
        format!("curve({})", c.components.join(", ")),
        AmbientSpace::euclidean(d),
        ParamDomain::new(vec![Coord::interval(c.lo, c.hi)]),
        move |u: &[f64]| {
            let mut pos = Vec::with_capacity(d);
            let mut d1 = Vec::with_capacity(d);
            let mut d2 = Vec::with_capacity(d);
            for a in &asts {
                let j = a.eval_jet2(u[0])?;
                pos.push(j.value);
                d1.push(j.d1);
                d2.push(j.d2);
            }
            Jet2::new(1, pos, d1, d2)
        },
    )
}

/// `kappa^2 = (|g'|^2 |g''|^2 - <g', g''>^2) / |g'|^6`, valid for any
/// regular parametrisation.
pub fn curve_curvature_sq(jet: &Jet2) -> Result<f64> {
    let (v, a) = (jet.first(0), jet.second(0, 0));
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let vv = dot(v, v);
    param(vv > 0.0, || "curve has vanishing speed".into())?;
    Ok((vv * dot(a, a) - dot(v, a).powi(2)) / vv.powi(3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductOptions {
    /// Sample points for the hypothesis on `g`.
    pub g_points: usize,
    /// Sample points along the curve.
    pub curve_points: usize,
    pub seed: u64,
}

impl Default for ProductOptions {
    fn default() -> Self {
        Self { g_points: 100, curve_points: 200, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductReport {
    pub n: usize,
    pub ell: usize,
    pub max_kappa_sq: f64,
    /// `min (a(n-1, ell-1, H_g, 0) - S_g)` over the samples of `g`.
    pub min_gap: f64,
    /// `(n - ell)/(n - ell - 1) * min_gap`.
    pub bound: f64,
    pub feasible: bool,
}

/// Product of a closed curve with a Euclidean immersion `g` of dimension
/// `n - 1`. `g` must satisfy the pinching bound strictly for `k = ell - 1`,
/// `c = 0` at its sample points; the curve is admissible when
/// `kappa^2 <= (n - ell)/(n - ell - 1) * min(a - S_g)`.
pub fn product_with_curve(curve: &Chart, g: &Chart, ell: usize, opts: &ProductOptions) -> Result<(Chart, ProductReport)> {
    if curve.n() != 1 {
        return Err(Error::Dimension(format!("expected a curve, got a chart of dimension {}", curve.n())));
    }
    if curve.ambient().curvature_flag() != 0 || g.ambient().curvature_flag() != 0 {
        return Err(Error::Precondition("both factors must lie in Euclidean space".into()));
    }
    let n = g.n() + 1;
    param(n >= 4, || format!("the product must have dimension >= 4, got {n}"))?;
    param(ell >= 2 && ell + 2 <= n, || format!("need 2 <= ell <= n-2, got ell = {ell}, n = {n}"))?;

    let dom = &curve.domain().coords[0];
    let (ja, jb) = (curve.jet(&[dom.lo])?, curve.jet(&[dom.hi])?);
    let scale = 1.0 + ja.position().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if ja.max_abs_diff(&jb) > 1e-8 * scale {
        return Err(Error::Precondition(format!("open curve (end jets differ by {:.3e})", ja.max_abs_diff(&jb))));
    }

    let mut points = g.domain().random_points(opts.g_points, opts.seed);
    points.extend(g.domain().grid(2));
    let mut min_gap = f64::INFINITY;
    for u in &points {
        let inv = invariants(&sff_at(g, u)?.1);
        min_gap = min_gap.min(pinch_bound(n - 1, ell - 1, inv.h, 0.0)? - inv.s);
    }
    if !(min_gap > 0.0) {
        return Err(Error::HypothesisFails(format!("g is not strictly pinched for k = {} (min a - S = {min_gap:.3e})", ell - 1)));
    }
    let bound = (n - ell) as f64 / (n - ell - 1) as f64 * min_gap;
    let mut max_kappa_sq: f64 = 0.0;
    for i in 0..opts.curve_points.max(1) {
        let s = dom.lo + (dom.hi - dom.lo) * i as f64 / opts.curve_points.max(1) as f64;
        max_kappa_sq = max_kappa_sq.max(curve_curvature_sq(&curve.jet(&[s])?)?);
    }
    let feasible = max_kappa_sq <= bound * (1.0 + 1e-8) + 1e-12;
    let report = ProductReport { n, ell, max_kappa_sq, min_gap, bound, feasible };

    let dc = curve.ambient().vector_dim();
    let dg = g.ambient().vector_dim();
    let mut coords = curve.domain().coords.clone();
    coords.extend(g.domain().coords.iter().copied());
    let (c2, g2) = (curve.clone(), g.clone());
    let chart = Chart::new(
        format!("{} x {}", curve.name(), g.name()),
        AmbientSpace::euclidean(dc + dg),
        ParamDomain::new(coords),
        move |u: &[f64]| {
            let jc = c2.jet(&u[..1])?;
            let jg = g2.jet(&u[1..])?;
            let dim = dc + dg;
            let mut pos = jc.position().to_vec();
            pos.extend_from_slice(jg.position());
            let mut d1 = vec![0.0; n * dim];
            d1[..dc].copy_from_slice(jc.first(0));
            for i in 1..n {
                d1[i * dim + dc..(i + 1) * dim].copy_from_slice(jg.first(i - 1));
            }
            let mut d2 = vec![0.0; n * (n + 1) / 2 * dim];
            d2[..dc].copy_from_slice(jc.second(0, 0));
            for i in 1..n {
                for j in i..n {
                    let p = pair_index(n, i, j);
                    d2[p * dim + dc..(p + 1) * dim].copy_from_slice(jg.second(i - 1, j - 1));
                }
            }
            Jet2::new(n, pos, d1, d2)
        },
    )?;
    Ok((chart, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaloidReport {
    pub n: usize,
    pub k: usize,
    pub min_lambda1: f64,
    pub max_lambdan: f64,
    /// `min lambda_1 * sqrt(n/(n-k)) - max lambda_n`.
    pub margin: f64,
    pub points: usize,
}

/// Principal curvatures of a hypersurface point, oriented so that their sum
/// is nonnegative, in increasing order.
pub fn principal_curvatures(chart: &Chart, u: &[f64]) -> Result<Vec<f64>> {
    principal_curvatures_of(&sff_at(chart, u)?.1)
}

pub fn principal_curvatures_of(sff: &Sff) -> Result<Vec<f64>> {
    if sff.m() != 1 {
        return Err(Error::Dimension(format!("expected a hypersurface, codimension is {}", sff.m())));
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(shape_matrix(sff, &[1.0])).eigenvalues.iter().copied().collect();
    if ev.iter().sum::<f64>() < 0.0 {
        ev.iter_mut().for_each(|v| *v = -*v);
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Margin of `max lambda_n <= min lambda_1 (n/(n-k))^(1/2)` over `points`.
pub fn ovaloid_margin(chart: &Chart, k: usize, points: &[Vec<f64>]) -> Result<OvaloidReport> {
    if chart.codim() != 1 || chart.ambient().curvature_flag() != 0 {
        return Err(Error::Dimension("ovaloid margin needs a Euclidean hypersurface".into()));
    }
    let sffs = points.iter().map(|u| Ok(sff_at(chart, u)?.1)).collect::<Result<Vec<_>>>()?;
    ovaloid_margin_of(&sffs, k)
}

/// As [`ovaloid_margin`], from second fundamental forms of a Euclidean
/// hypersurface.
pub fn ovaloid_margin_of(sffs: &[Sff], k: usize) -> Result<OvaloidReport> {
    let n = sffs.first().map(Sff::n).ok_or_else(|| Error::Parameter("no sample points".into()))?;
    param(k >= 1 && k < n, || format!("need 1 <= k <= n-1, got k = {k}, n = {n}"))?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, sff) in sffs.iter().enumerate() {
        if sff.curvature() != 0.0 {
            return Err(Error::Dimension("ovaloid margin needs a Euclidean hypersurface".into()));
        }
        let pc = principal_curvatures_of(sff)?;
        if !(pc[0] > 0.0) {
            return Err(Error::NotOvaloid(format!("principal curvature {:.3e} at sample {i}", pc[0])));
        }
        lo = lo.min(pc[0]);
        hi = hi.max(pc[n - 1]);
    }
    let margin = lo * (n as f64 / (n - k) as f64).sqrt() - hi;
    Ok(OvaloidReport { n, k, min_lambda1: lo, max_lambdan: hi, margin, points: sffs.len() })
}

/// Parameter points of the ellipsoid chart on the shortest and longest axes.
pub fn ellipsoid_axis_points(n: usize) -> Vec<Vec<f64>> {
    let mut shortest = vec![FRAC_PI_2; n];
    let mut longest = shortest.clone();
    longest[n - 1] = 0.0;
    shortest[n - 1] = FRAC_PI_2;
    vec![shortest, longest]
}

/// `a_n = (sqrt(2(n-1)(n-2)) + n - 1)/(n - 3)`, `b_n = (sqrt(2(n-1)(n-2)) - (n-1))/(n - 3)`.
pub fn rotational_constants(n: usize) -> Result<(f64, f64)> {
    param(n >= 4, || format!("need n >= 4, got {n}"))?;
    let nf = n as f64;
    let root = (2.0 * (nf - 1.0) * (nf - 2.0)).sqrt();
    Ok(((root + nf - 1.0) / (nf - 3.0), (root - (nf - 1.0)) / (nf - 3.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationalReport {
    pub x: f64,
    pub n: usize,
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
    pub lambda: f64,
    pub mu: f64,
    /// `(n-1) lambda^2 + 2(n-1) lambda mu - (n-3) mu^2`.
    pub curvature_form: f64,
    /// `u u'' / (1 + u'^2)`; the criterion is `-a_n < t < b_n`.
    pub t: f64,
    pub lower_margin: f64,
    pub upper_margin: f64,
    pub curvature_strict: bool,
    pub profile_strict: bool,
    pub agree: bool,
}

/// Evaluate both forms of the strict pinching criterion for a rotational
/// hypersurface at `x`.
pub fn rotational_strict_check(profile: &ExprAst, x: f64, n: usize) -> Result<RotationalReport> {
    let (an, bn) = rotational_constants(n)?;
    let j = profile.eval_jet2(x)?;
    let (u, du, ddu) = (j.value, j.d1, j.d2);
    param(u > 0.0, || format!("profile is not positive at x = {x}"))?;
    let w = 1.0 + du * du;
    let lambda = 1.0 / (u * w.sqrt());
    let mu = -ddu / w.powf(1.5);
    let nf = n as f64;
    let curvature_form = (nf - 1.0) * lambda * lambda + 2.0 * (nf - 1.0) * lambda * mu - (nf - 3.0) * mu * mu;
    let t = u * ddu / w;
    let lower_margin = t + an;
    let upper_margin = bn - t;
    let curvature_strict = curvature_form > 0.0;
    let profile_strict = lower_margin > 0.0 && upper_margin > 0.0;
    // Near the boundary the two forms may round differently.
    let boundary = lower_margin.abs().min(upper_margin.abs()) <= 1e-12 * (1.0 + t.abs());
    let agree = curvature_strict == profile_strict || boundary;
    Ok(RotationalReport { x, n, u, du, ddu, lambda, mu, curvature_form, t, lower_margin, upper_margin, curvature_strict, profile_strict, agree })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub params: &'static str,
    pub ranges: &'static str,
    pub role: &'static str,
}

pub fn catalog_entries() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry { id: "round_sphere", params: "n, radius", ranges: "n >= 1, radius > 0", role: "umbilical hypersurface S^n(R) in R^(n+1)" },
        CatalogEntry {
            id: "clifford_torus",
            params: "n, k, r",
            ranges: "1 <= k <= n-1, 0 < r < 1",
            role: "S^k(r) x S^(n-k)(sqrt(1-r^2)) in S^(n+1); equality in the pinching bound when n = 2k, or k < n/2 and r >= sqrt(k/n)",
        },
        CatalogEntry {
            id: "sphere_product",
            params: "k, r, R, placement",
            ranges: "k >= 1, 0 < r < R (R < 1 for placement = sphere)",
            role: "S^k(r) x S^k(sqrt(R^2-r^2)) in R^(2k+2); equality case with c = 0 for k = 2",
        },
        CatalogEntry {
            id: "cp2_veronese",
            params: "r",
            ranges: "r > 0",
            role: "minimal CP^2 in S^7(r); equality case with non-flat normal bundle, holomorphic curvature 4/(3 r^2)",
        },
        CatalogEntry {
            id: "ellipsoid",
            params: "axes",
            ranges: "0 < a_1 <= ... <= a_(n+1), n >= 2",
            role: "ovaloid; principal curvatures range over [a_1/a_(n+1)^2, a_(n+1)/a_1^2]",
        },
        CatalogEntry {
            id: "rotational",
            params: "n, profile, lo, hi",
            ranges: "n >= 2, profile > 0 on [lo, hi]",
            role: "rotation of the graph of u about the x_1 axis in R^(n+1)",
        },
        CatalogEntry { id: "curve", params: "components, lo, hi", ranges: "regular parametrisation", role: "space curve for products" },
        CatalogEntry {
            id: "product_with_curve",
            params: "curve, g, ell",
            ranges: "2 <= ell <= n-2, g strictly pinched for k = ell-1",
            role: "S^1 x N^(n-1) built from a closed curve and a pinched g",
        },
    ]
}

/// Intrinsic sectional curvature of the coordinate frame at `u`, computed
/// from the induced metric alone, for cross-checking the Gauss equation.
pub fn intrinsic_sectional(chart: &Chart, u: &[f64]) -> Result<crate::curvature::CurvTensor> {
    crate::curvature::intrinsic_curvature(chart, u, &frames_at(chart, u)?)
}
