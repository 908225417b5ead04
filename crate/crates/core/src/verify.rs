//! Named verification suites. Each criterion is a self-contained check with
//! pinned tolerances; the CLI `verify` command and the `acceptance` test
//! target both run them through [`run_suite`].

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, build_model, product_with_curve, CurveSpec, ModelSpec, Placement, ProductOptions};
use crate::curvature::{self, adapted_frame, bw_adapted_closed_form, bw_from_sff, dupin_decomposition, gauss_curvature, hodge_split, normal_curvature, Orientation};
use crate::dsl;
use crate::engine::{invariants, sff_at, Chart};
use crate::frameopt::{self, haar_orthogonal, FrameSettings};
use crate::par::Exec;
use crate::pinch::{self, pinch_check, Verdict, EQUALITY_TOL};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Overrides the sample count of the randomized criteria.
    pub count: Option<usize>,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { count: None, seed: 7, exec: Exec::default() }
    }
}

impl VerifyOptions {
    fn count(&self, default: usize) -> usize {
        self.count.unwrap_or(default)
    }
}

/// `(suite name, criterion ids)`.
pub const SUITES: &[(&str, &[usize])] = &[
    ("equality-cases", &[1, 2, 8, 9]),
    ("lemp", &[3]),
    ("propu", &[4]),
    ("closed-form", &[5]),
    ("adapted-frame", &[6]),
    ("sb", &[7]),
    ("dupin", &[8]),
    ("examples", &[9, 10]),
    ("gauss-consistency", &[11]),
    ("all", &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]),
];

const NAMES: [&str; 11] = [
    "equality fixtures (Clifford tori)",
    "CP2 Veronese fixture",
    "BW eigenvalue gap",
    "Lawson-Simons equality structure",
    "closed-form B+- oracle",
    "adapted-frame round trip",
    "BW / isotropic nonnegativity equivalence",
    "Dupin principal normals",
    "product with a curve",
    "rotational hypersurfaces",
    "Gauss consistency",
];

const BUDGETS: [f64; 11] = [5.0, 10.0, 30.0, 60.0, 10.0, 30.0, 60.0, 5.0, 5.0, 5.0, 60.0];

pub fn suite_ids(name: &str) -> Result<&'static [usize]> {
    SUITES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ids)| *ids)
        .ok_or_else(|| Error::Parameter(format!("unknown suite {name:?}; known: {}", SUITES.iter().map(|s| s.0).collect::<Vec<_>>().join(", "))))
}

pub fn run_suite(name: &str, opts: &VerifyOptions) -> Result<Vec<CriterionResult>> {
    Ok(suite_ids(name)?.iter().map(|&id| run_criterion(id, opts)).collect())
}

/// Run one criterion by its number (1-11). Errors inside a check count as
/// failures and are reported in `detail`.
pub fn run_criterion(id: usize, opts: &VerifyOptions) -> CriterionResult {
    let start = Instant::now();
    let outcome = match id {
        1 => equality_fixtures(),
        2 => cp2_fixture(opts),
        3 => lemp(opts),
        4 => propu(opts),
        5 => closed_form(opts),
        6 => adapted_round_trip(opts),
        7 => sb(opts),
        8 => dupin(),
        9 => product(),
        10 => rotational(opts),
        11 => gauss_consistency(opts),
        _ => Err(Error::Parameter(format!("no criterion {id}"))),
    };
    let (passed, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        name: NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown").to_string(),
        passed,
        detail,
        elapsed_s: start.elapsed().as_secs_f64(),
        budget_s: BUDGETS.get(id.wrapping_sub(1)).copied().unwrap_or(0.0),
    }
}

type Outcome = Result<(bool, String)>;

fn slacks(chart: &Chart, k: usize, c: f64, points: &[Vec<f64>]) -> Result<Vec<f64>> {
    points.iter().map(|u| Ok(pinch_check(&invariants(&sff_at(chart, u)?.1), k, c, EQUALITY_TOL)?.slack)).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn equality_fixtures() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (n, k) in [(4, 2), (6, 3)] {
        let chart = build_model(&ModelSpec::CliffordTorus { n, k, r: FRAC_1_SQRT_2 })?;
        let s = slacks(&chart, k, 1.0, &chart.domain().random_points(100, 1))?;
        let worst = max_abs(&s);
        ok &= worst <= 1e-8;
        detail.push(format!("T{n}_{k}: max|slack| {worst:.1e}"));
    }
    for r in [0.5, 0.6, 0.8, 0.3] {
        let chart = build_model(&ModelSpec::CliffordTorus { n: 4, k: 1, r })?;
        let pts = chart.domain().random_points(100, 2);
        let verdicts: Vec<Verdict> = pts
            .iter()
            .map(|u| Ok(pinch_check(&invariants(&sff_at(&chart, u)?.1), 2, 1.0, EQUALITY_TOL)?.verdict))
            .collect::<Result<_>>()?;
        let violated = verdicts.iter().filter(|v| **v == Verdict::Violated).count();
        let expect = if r >= 0.5 { 0 } else { pts.len() };
        ok &= violated == expect;
        detail.push(format!("T4_1({r}): {violated}/100 violated"));
    }
    Ok((ok, detail.join("; ")))
}

fn cp2_fixture(opts: &VerifyOptions) -> Outcome {
    let chart = build_model(&ModelSpec::Cp2Veronese { r: 1.0 })?;
    let (mut h, mut ds, mut slack, mut min_normal) = (0.0f64, 0.0f64, 0.0f64, f64::INFINITY);
    for u in chart.domain().random_points(50, opts.seed) {
        let sff = sff_at(&chart, &u)?.1;
        let inv = invariants(&sff);
        h = h.max(inv.h);
        ds = ds.max((inv.s - 4.0).abs());
        slack = slack.max(pinch_check(&inv, 2, 1.0, EQUALITY_TOL)?.slack.abs());
        let nc = normal_curvature(&sff);
        min_normal = min_normal.min(if nc.flat { 0.0 } else { nc.max_abs });
    }
    let ok = h <= 1e-8 && ds <= 1e-6 && slack <= 1e-6 && min_normal > 0.0;
    Ok((ok, format!("max|H| {h:.1e}, max|S-4| {ds:.1e}, max|slack| {slack:.1e}, min |R_perp| {min_normal:.3}")))
}

fn lemp(opts: &VerifyOptions) -> Outcome {
    let rep = pinch::lemp_harness(opts.count(10_000), opts.seed, opts.exec);
    Ok((rep.passed, format!("{} samples, min gap {:.3e}", rep.count, rep.min_gap)))
}

fn harness_settings(opts: &VerifyOptions) -> FrameSettings {
    FrameSettings { restarts: 1, seed: opts.seed, tol: 1e-9, exec: opts.exec, ..FrameSettings::default() }
}

fn propu(opts: &VerifyOptions) -> Outcome {
    let count = opts.count(10_000);
    let settings = harness_settings(opts);
    let eq = pinch::propu_harness(count, opts.seed, None, 1.0, &settings);
    let below = pinch::propu_harness(count, opts.seed.wrapping_add(1), None, 0.9, &settings);
    let mut detail = format!(
        "equality: {} samples, max ls_min {:.3e}, {} at equality (structure residual {:.1e}); 90%: max ls_min {:.3e}",
        count, eq.max_value, eq.equality_samples, eq.max_structure_residual, below.max_value
    );
    for (tag, rep) in [("equality", &eq), ("90%", &below)] {
        if let Some(ce) = &rep.counterexample {
            detail.push_str(&format!("; {tag} counterexample #{} value {:.3e}", ce.index, ce.value));
        }
    }
    Ok((eq.passed && below.passed, detail))
}

fn closed_form(opts: &VerifyOptions) -> Outcome {
    let count = opts.count(1000);
    let diffs = opts.exec.map(count, |i| -> Result<f64> {
        let mut r = frameopt::rng(opts.seed, i as u64);
        let m = r.gen_range(1..=5);
        let c = r.gen_range(0..2) as f64;
        let sff = curvature::random_adapted(&mut r, m, c);
        let (cp, cm) = bw_adapted_closed_form(&sff)?;
        let (bp, bm) = hodge_split(&bw_from_sff(&sff), Orientation::Positive)?;
        Ok((cp - bp).amax().max((cm - bm).amax()))
    });
    let diffs: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
    let worst = max_abs(&diffs);
    Ok((worst <= 1e-10, format!("{count} samples, max entry difference {worst:.1e}")))
}

fn adapted_round_trip(opts: &VerifyOptions) -> Outcome {
    let count = opts.count(100);
    let settings = FrameSettings { restarts: 4, seed: opts.seed, exec: Exec::Sequential, ..FrameSettings::default() };
    let results = opts.exec.map(count, |i| -> Result<f64> {
        let mut r = frameopt::rng(opts.seed, i as u64);
        let radius: f64 = r.gen_range(0.3..0.9);
        let big_r: f64 = radius * r.gen_range(1.2..2.5);
        let placement = if i % 2 == 0 { Placement::Euclidean } else { Placement::Sphere };
        let big_r = if placement == Placement::Sphere { big_r.min(0.95) } else { big_r };
        let radius = radius.min(0.9 * big_r);
        let chart = build_model(&ModelSpec::SphereProduct { k: 2, r: radius, big_r, placement })?;
        let u: Vec<f64> = chart.domain().random_points(1, opts.seed.wrapping_add(i as u64)).remove(0);
        let sff = sff_at(&chart, &u)?.1;
        let mut q = haar_orthogonal(4, &mut r);
        if q.determinant() < 0.0 {
            q.swap_columns(0, 1);
        }
        let rotated = sff.in_tangent_frame(&q);
        Ok(adapted_frame(&rotated, &FrameSettings { seed: opts.seed ^ i as u64, ..settings })?.residuals.max())
    });
    let res: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let worst = max_abs(&res);
    Ok((worst <= 1e-9, format!("{count} rotated sphere-product points, max residual {worst:.1e}")))
}

fn sb(opts: &VerifyOptions) -> Outcome {
    let rep = curvature::sb_harness(opts.count(10_000), opts.seed, 200, &harness_settings(opts));
    let mut detail = format!(
        "{} samples, {} nonnegative, {} decided by random frames alone, {} inside the tolerance band, {} disagreements",
        rep.count,
        rep.nonnegative,
        rep.refined,
        rep.band,
        rep.disagreements.len()
    );
    if let Some(d) = rep.disagreements.first() {
        detail.push_str(&format!("; first #{}: lambda_min {:.3e}, isotropic min {:.3e}", d.index, d.bw_min, d.isotropic_min));
    }
    Ok((rep.passed, detail))
}

fn dupin() -> Outcome {
    let (mut torus, mut product) = (0.0f64, 0.0f64);
    for r in [0.4, FRAC_1_SQRT_2, 0.85] {
        let chart = build_model(&ModelSpec::CliffordTorus { n: 4, k: 2, r })?;
        for u in chart.domain().random_points(10, 3) {
            torus = torus.max((dupin_decomposition(&sff_at(&chart, &u)?.1)?.inner + 1.0).abs());
        }
    }
    for (r, big_r) in [(0.5, 1.0), (1.0, 1.5), (0.3, 2.0)] {
        let chart = build_model(&ModelSpec::SphereProduct { k: 2, r, big_r, placement: Placement::Euclidean })?;
        for u in chart.domain().random_points(10, 4) {
            product = product.max(dupin_decomposition(&sff_at(&chart, &u)?.1)?.inner.abs());
        }
    }
    Ok((torus <= 1e-9 && product <= 1e-9, format!("tori in S^5: max|<eta1,eta2> + 1| {torus:.1e}; products in R^6: max|<eta1,eta2>| {product:.1e}")))
}

fn product() -> Outcome {
    let rho = 1.0 / 3f64.sqrt();
    let curve = CurveSpec { components: vec![format!("{rho}*cos(s)"), format!("{rho}*sin(s)")], lo: 0.0, hi: std::f64::consts::TAU };
    let g = build_model(&ModelSpec::RoundSphere { n: 3, radius: 1.0 })?;
    let curve_chart = build_model(&ModelSpec::Curve(curve))?;
    let (chart, rep) = product_with_curve(&curve_chart, &g, 2, &ProductOptions::default())?;
    let (mut slack, mut ds, mut dh) = (f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for u in chart.domain().random_points(200, 5) {
        let inv = invariants(&sff_at(&chart, &u)?.1);
        slack = slack.max(pinch_check(&inv, 2, 0.0, EQUALITY_TOL)?.slack);
        let kappa = catalog::curve_curvature_sq(&curve_chart.jet(&u[..1])?)?;
        let ig = invariants(&sff_at(&g, &u[1..])?.1);
        ds = ds.max((inv.s - (kappa + ig.s)).abs());
        dh = dh.max((16.0 * inv.h * inv.h - (kappa + 9.0 * ig.h * ig.h)).abs());
    }
    let ok = rep.feasible && slack <= 1e-8 && ds <= 1e-10 && dh <= 1e-10;
    Ok((ok, format!("kappa^2 {:.6} <= bound {:.6}; max slack {slack:.1e}; S_f error {ds:.1e}; n^2 H_f^2 error {dh:.1e}", rep.max_kappa_sq, rep.bound)))
}

/// Random profile from a few families, with its positivity interval.
fn random_profile(r: &mut impl Rng) -> (String, f64, f64) {
    match r.gen_range(0..5) {
        0 => {
            let (a, b, w) = (r.gen_range(1.0..3.0), r.gen_range(-0.9..0.9), r.gen_range(0.2..3.0));
            (format!("{a}+{b}*sin({w}*x)"), -2.0, 2.0)
        }
        1 => {
            let (a, b) = (r.gen_range(0.5..2.0), r.gen_range(-1.0..1.0));
            (format!("{a}+{b}*x^2"), -0.5, 0.5)
        }
        2 => {
            let rad = r.gen_range(0.5..2.0);
            (format!("sqrt({}-x^2)", rad * rad), -0.9 * rad, 0.9 * rad)
        }
        3 => {
            let (a, b) = (r.gen_range(0.3..2.0), r.gen_range(-1.5..1.5));
            (format!("{a}*exp({b}*x)"), -1.0, 1.0)
        }
        _ => {
            let (a, b) = (r.gen_range(0.5..2.0), r.gen_range(0.2..2.0));
            (format!("{a}*(exp({b}*x)+exp(-{b}*x))/2"), -1.0, 1.0)
        }
    }
}

fn rotational(opts: &VerifyOptions) -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    let (a4, b4) = catalog::rotational_constants(4)?;
    let da = (a4 - (3.0 + 2.0 * 3f64.sqrt())).abs();
    ok &= da <= 1e-12;
    detail.push(format!("a4 error {da:.1e}, b4 = {b4:.6}"));
    let sphere = dsl::parse("sqrt(1-x^2)")?;
    let cylinder = dsl::parse("1.5")?;
    let mut fixtures = true;
    for n in 4..=8 {
        for x in [-0.8, -0.2, 0.0, 0.4, 0.9] {
            for ast in [&sphere, &cylinder] {
                let rep = catalog::rotational_strict_check(ast, x, n)?;
                fixtures &= rep.curvature_strict && rep.profile_strict && rep.agree;
            }
        }
    }
    ok &= fixtures;
    detail.push(format!("sphere and cylinder strict: {fixtures}"));
    let count = opts.count(1000);
    let mut r = frameopt::rng(opts.seed, 10);
    let (mut agree, mut strict) = (0usize, 0usize);
    for _ in 0..count {
        let (src, lo, hi) = random_profile(&mut r);
        let ast = dsl::parse(&src)?;
        let rep = catalog::rotational_strict_check(&ast, r.gen_range(lo..hi), r.gen_range(4..=8))?;
        agree += rep.agree as usize;
        strict += rep.profile_strict as usize;
    }
    ok &= agree == count;
    detail.push(format!("{agree}/{count} random samples agree ({strict} strict)"));
    Ok((ok, detail.join("; ")))
}

/// Models used for the Gauss-consistency check.
pub fn gauss_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::RoundSphere { n: 4, radius: 1.3 },
        ModelSpec::CliffordTorus { n: 4, k: 2, r: 0.6 },
        ModelSpec::CliffordTorus { n: 5, k: 2, r: 0.45 },
        ModelSpec::SphereProduct { k: 2, r: 0.6, big_r: 1.4, placement: Placement::Euclidean },
        ModelSpec::SphereProduct { k: 2, r: 0.4, big_r: 0.8, placement: Placement::Sphere },
        ModelSpec::Cp2Veronese { r: 1.0 },
        ModelSpec::Ellipsoid { axes: vec![1.0, 1.2, 1.5, 1.7, 2.0] },
        ModelSpec::Rotational { n: 4, profile: "2+0.5*sin(x)".into(), lo: -2.0, hi: 2.0 },
        ModelSpec::ProductWithCurve {
            curve: CurveSpec { components: vec!["cos(s)".into(), "0.5*sin(s)".into()], lo: 0.0, hi: std::f64::consts::TAU },
            g: Box::new(ModelSpec::RoundSphere { n: 3, radius: 1.0 }),
            ell: 2,
        },
    ]
}

fn gauss_consistency(opts: &VerifyOptions) -> Outcome {
    let count = opts.count(100);
    let mut ok = true;
    let mut detail = Vec::new();
    for spec in gauss_models() {
        let chart = build_model(&spec)?;
        let points = chart.domain().random_points(count, opts.seed);
        let diffs = opts.exec.map(points.len(), |i| -> Result<f64> {
            let u = &points[i];
            let sff = sff_at(&chart, u)?.1;
            let r = catalog::intrinsic_sectional(&chart, u)?;
            Ok(r.max_abs_diff(&gauss_curvature(&sff)))
        });
        let diffs: Vec<f64> = diffs.into_iter().collect::<Result<_>>()?;
        let worst = max_abs(&diffs);
        ok &= worst <= 1e-4;
        detail.push(format!("{} {worst:.1e}", spec.id()));
    }
    Ok((ok, detail.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nosuch", &VerifyOptions::default()).is_err());
        assert!(suite_ids("all").unwrap().len() == 11);
    }

    #[test]
    fn quick_criteria() {
        let opts = VerifyOptions { count: Some(20), ..VerifyOptions::default() };
        for id in [1, 2, 3, 5, 8, 9, 10, 11] {
            let r = run_criterion(id, &opts);
            assert!(r.passed, "{r:?}");
        }
    }
}
