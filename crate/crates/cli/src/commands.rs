use std::io::Write;

use pinch_core::catalog::{self, build_model, CurveSpec, ModelSpec, ProductOptions};
use pinch_core::curvature::{
    adapted_frame, bw_from_sff, dupin_decomposition, gauss_curvature, hodge_split, isotropic_min, star_commutator, Orientation,
};
use pinch_core::dsl;
use pinch_core::engine::{frames, invariants, second_fundamental_form, sff_at, Chart, Coord, ParamDomain, Sff};
use pinch_core::jetfile::JetFile;
use pinch_core::par::Exec;
use pinch_core::pinch::{ls_min, pinch_check, Verdict};
use pinch_core::verify::{self, VerifyOptions};
use serde_json::{json, Value};

use crate::config::{parse_model, Format, Input, RunConfig, Sampling};
use crate::output::{emit, point_record, rows, Report, REPORT_VERSION};
use crate::{CatalogAction, Cli, Command};

type CmdResult = Result<bool, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Sample points of the input and their second fundamental forms.
struct Samples {
    chart: Option<Chart>,
    points: Vec<Vec<f64>>,
    sffs: Vec<Result<Sff, String>>,
}

fn domain_points(domain: &ParamDomain, cfg: &RunConfig) -> Vec<Vec<f64>> {
    match cfg.sampling {
        Sampling::Grid { per_dim } => domain.grid(per_dim),
        Sampling::Random { count } => domain.random_points(count, cfg.seed),
        Sampling::JetFile => Vec::new(),
    }
}

fn samples(cfg: &RunConfig) -> Result<Samples, String> {
    match &cfg.input {
        Input::Model(spec) => {
            let chart = build_model(spec).map_err(err)?;
            let points = domain_points(chart.domain(), cfg);
            let sffs = Exec::default().map(points.len(), |i| sff_at(&chart, &points[i]).map(|p| p.1).map_err(err));
            Ok(Samples { chart: Some(chart), points, sffs })
        }
        Input::Jets(path) => {
            let file = JetFile::load(path).map_err(err)?;
            let ambient = file.ambient().map_err(err)?;
            let jets = file.jets().map_err(err)?;
            let sffs = jets
                .iter()
                .map(|j| frames(&ambient, j).and_then(|fp| second_fundamental_form(&ambient, &fp, j)).map_err(err))
                .collect();
            Ok(Samples { chart: None, points: file.points.iter().map(|p| p.u.clone()).collect(), sffs })
        }
        Input::None => Err("an input is required: --model or --jets".into()),
    }
}

/// One record per sample point; `f` sees the point's second fundamental form.
fn per_point(s: &Samples, f: impl Fn(&Sff) -> Result<Value, String> + Sync) -> Vec<Value> {
    let bodies = Exec::default().map(s.points.len(), |i| s.sffs[i].clone().and_then(|sff| f(&sff)));
    bodies.into_iter().enumerate().map(|(i, b)| point_record(i, &s.points[i], b)).collect()
}

fn finish(cfg: RunConfig, records: Vec<Value>, summary: Value, columns: &[&str], out: &mut impl Write) -> Result<(), String> {
    if cfg.seed_defaulted {
        eprintln!("note: using default seed {}", cfg.seed);
    }
    let report = Report { version: REPORT_VERSION, config: cfg, records, summary };
    emit(&report, columns, out).map_err(err)
}

fn error_count(records: &[Value]) -> usize {
    records.iter().filter(|r| r.get("error").is_some()).count()
}

pub fn run(cli: &Cli, out: &mut impl Write) -> CmdResult {
    let c = &cli.common;
    match &cli.command {
        Command::Invariants => {
            let cfg = RunConfig::resolve("invariants", c, true, json!({}))?;
            let s = samples(&cfg)?;
            let records = per_point(&s, |sff| {
                let inv = invariants(sff);
                Ok(json!({"S": inv.s, "H": inv.h, "phi_sq": inv.traceless_sq, "nullity": inv.nullity_dim, "first_normal_dim": inv.first_normal_dim}))
            });
            let max = |key: &str| records.iter().filter_map(|r| r.get(key).and_then(Value::as_f64)).fold(f64::NEG_INFINITY, f64::max);
            let summary = json!({"points": records.len(), "errors": error_count(&records), "max_S": max("S"), "max_H": max("H")});
            finish(cfg, records, summary, &["index", "u", "S", "H", "phi_sq", "nullity", "first_normal_dim", "error"], out)?;
            Ok(true)
        }
        Command::Pinch { k } => {
            let cfg = RunConfig::resolve("pinch", c, true, json!({"k": k}))?;
            let s = samples(&cfg)?;
            let tol = cfg.tol;
            let records = per_point(&s, |sff| {
                let rep = pinch_check(&invariants(sff), *k, sff.curvature(), tol).map_err(err)?;
                Ok(json!({"S": rep.s, "H": rep.h, "c": rep.c, "bound": rep.bound, "slack": rep.slack, "verdict": rep.verdict}))
            });
            let slacks: Vec<f64> = records.iter().filter_map(|r| r.get("slack").and_then(Value::as_f64)).collect();
            let count = |v: Verdict| records.iter().filter(|r| r.get("verdict") == Some(&json!(v))).count();
            let summary = json!({
                "points": records.len(),
                "errors": error_count(&records),
                "min_slack": slacks.iter().copied().fold(f64::INFINITY, f64::min),
                "max_slack": slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "strict": count(Verdict::Strict),
                "equality": count(Verdict::Equality),
                "violated": count(Verdict::Violated),
            });
            finish(cfg, records, summary, &["index", "u", "S", "H", "bound", "slack", "verdict", "error"], out)?;
            Ok(true)
        }
        Command::Verify { suite, count } => {
            let cfg = RunConfig::resolve("verify", c, false, json!({"suite": suite, "count": count}))?;
            let opts = VerifyOptions { count: *count, seed: cfg.seed, exec: Exec::default() };
            verify::suite_ids(suite).map_err(err)?;
            if cfg.seed_defaulted {
                eprintln!("note: using default seed {}", cfg.seed);
            }
            let results = verify::run_suite(suite, &opts).map_err(err)?;
            let passed = results.iter().all(|r| r.passed);
            if cfg.format == Format::Table {
                for r in &results {
                    let status = if r.passed { "PASS" } else { "FAIL" };
                    writeln!(out, "[{status}] {:>2}. {} ({:.2} s): {}", r.id, r.name, r.elapsed_s, r.detail).map_err(err)?;
                }
                writeln!(out, "{} of {} criteria passed", results.iter().filter(|r| r.passed).count(), results.len()).map_err(err)?;
                return Ok(passed);
            }
            // Timings are left out so that identical runs give identical reports.
            let records: Vec<Value> = results
                .iter()
                .map(|r| json!({"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail, "budget_s": r.budget_s}))
                .collect();
            let summary = json!({"suite": suite, "passed": results.iter().filter(|r| r.passed).count(), "failed": results.iter().filter(|r| !r.passed).count()});
            let report = Report { version: REPORT_VERSION, config: cfg, records, summary };
            emit(&report, &["id", "name", "passed", "detail"], out).map_err(err)?;
            Ok(passed)
        }
        Command::Bw => {
            let cfg = RunConfig::resolve("bw", c, true, json!({}))?;
            let s = samples(&cfg)?;
            let records = per_point(&s, |sff| {
                let bw = bw_from_sff(sff);
                let mut v = json!({"lambda_min": bw.min_eigenvalue(), "eigenvalues": bw.eigenvalues(), "basis": "lexicographic", "matrix": rows(&bw.matrix)});
                if sff.n() == 4 {
                    let (bp, bm) = hodge_split(&bw, Orientation::Positive).map_err(err)?;
                    v["b_plus"] = rows(&bp);
                    v["b_minus"] = rows(&bm);
                    v["split_basis"] = json!("eta");
                    v["star_commutator"] = json!(star_commutator(&bw).map_err(err)?);
                }
                Ok(v)
            });
            let lmin = records.iter().filter_map(|r| r.get("lambda_min").and_then(Value::as_f64)).fold(f64::INFINITY, f64::min);
            let summary = json!({"points": records.len(), "errors": error_count(&records), "min_lambda_min": lmin});
            finish(cfg, records, summary, &["index", "u", "lambda_min", "eigenvalues", "star_commutator", "error"], out)?;
            Ok(true)
        }
        Command::IsotropicMin { samples: frames_count } => {
            let cfg = RunConfig::resolve("isotropic-min", c, true, json!({"samples": frames_count}))?;
            let s = samples(&cfg)?;
            let settings = pinch_core::frameopt::FrameSettings { exec: Exec::Sequential, ..cfg.frame };
            let records = per_point(&s, |sff| {
                let r = isotropic_min(&gauss_curvature(sff), *frames_count, &settings, None).map_err(err)?;
                Ok(json!({"value": r.value, "random_min": r.random_min, "converged": r.converged, "frame": rows(&r.frame)}))
            });
            let min = records.iter().filter_map(|r| r.get("value").and_then(Value::as_f64)).fold(f64::INFINITY, f64::min);
            let summary = json!({"points": records.len(), "errors": error_count(&records), "min_value": min});
            finish(cfg, records, summary, &["index", "u", "value", "random_min", "converged", "error"], out)?;
            Ok(true)
        }
        Command::LsMin { p } => {
            let cfg = RunConfig::resolve("ls-min", c, true, json!({"p": p}))?;
            let s = samples(&cfg)?;
            let settings = pinch_core::frameopt::FrameSettings { exec: Exec::Sequential, ..cfg.frame };
            let records = per_point(&s, |sff| {
                let r = ls_min(sff, *p, sff.curvature(), &settings).map_err(err)?;
                Ok(json!({"p": r.p, "value": r.value, "minimized": r.minimized, "basis": rows(&r.basis)}))
            });
            let max = records.iter().filter_map(|r| r.get("value").and_then(Value::as_f64)).fold(f64::NEG_INFINITY, f64::max);
            let summary = json!({"points": records.len(), "errors": error_count(&records), "max_value": max});
            finish(cfg, records, summary, &["index", "u", "p", "value", "minimized", "error"], out)?;
            Ok(true)
        }
        Command::AdaptFrame => {
            let cfg = RunConfig::resolve("adapt-frame", c, true, json!({}))?;
            let s = samples(&cfg)?;
            let settings = pinch_core::frameopt::FrameSettings { exec: Exec::Sequential, ..cfg.frame };
            let records = per_point(&s, |sff| {
                let a = adapted_frame(sff, &settings).map_err(err)?;
                Ok(json!({
                    "residual_a1": a.residuals.a1,
                    "residual_a2": a.residuals.a2,
                    "residual_a3": a.residuals.a3,
                    "theta": a.theta,
                    "phi": a.phi,
                    "rho": a.rho,
                    "kernel": a.kernel,
                    "ls_value": a.ls_value,
                    "frame": rows(&a.frame),
                }))
            });
            let worst = records
                .iter()
                .flat_map(|r| ["residual_a1", "residual_a2", "residual_a3"].map(|k| r.get(k).and_then(Value::as_f64)))
                .flatten()
                .fold(0.0, f64::max);
            let summary = json!({"points": records.len(), "errors": error_count(&records), "max_residual": worst});
            finish(cfg, records, summary, &["index", "u", "residual_a1", "residual_a2", "residual_a3", "theta", "phi", "rho", "error"], out)?;
            Ok(true)
        }
        Command::Dupin => {
            let cfg = RunConfig::resolve("dupin", c, true, json!({}))?;
            let s = samples(&cfg)?;
            let records = per_point(&s, |sff| {
                let d = dupin_decomposition(sff).map_err(err)?;
                Ok(json!({"eta1": d.eta1, "eta2": d.eta2, "inner": d.inner, "e1": rows(&d.e1), "e2": rows(&d.e2)}))
            });
            let summary = json!({"points": records.len(), "errors": error_count(&records)});
            finish(cfg, records, summary, &["index", "u", "eta1", "eta2", "inner", "error"], out)?;
            Ok(true)
        }
        Command::Ovaloid { k } => {
            let cfg = RunConfig::resolve("ovaloid", c, true, json!({"k": k}))?;
            let mut s = samples(&cfg)?;
            if let (Input::Model(ModelSpec::Ellipsoid { axes }), Some(chart)) = (&cfg.input, &s.chart) {
                // The curvature extremes sit on the shortest and longest axes.
                for u in catalog::ellipsoid_axis_points(axes.len() - 1) {
                    s.sffs.push(sff_at(chart, &u).map(|p| p.1).map_err(err));
                    s.points.push(u);
                }
            }
            let sffs: Vec<Sff> = s.sffs.iter().cloned().collect::<Result<_, _>>()?;
            let report = catalog::ovaloid_margin_of(&sffs, *k).map_err(err)?;
            let records = per_point(&s, |sff| {
                let pc = catalog::principal_curvatures_of(sff).map_err(err)?;
                Ok(json!({"lambda_1": pc[0], "lambda_n": pc[pc.len() - 1], "principal_curvatures": pc}))
            });
            let summary = serde_json::to_value(&report).map_err(err)?;
            finish(cfg, records, summary, &["index", "u", "lambda_1", "lambda_n", "error"], out)?;
            Ok(true)
        }
        Command::Rotational { profile, n, x, lo, hi } => {
            let cfg = RunConfig::resolve("rotational", c, false, json!({"profile": profile, "n": n, "x": x, "lo": lo, "hi": hi}))?;
            let ast = dsl::parse(profile).map_err(err)?;
            let xs: Vec<f64> = if !x.is_empty() {
                x.clone()
            } else {
                match (lo, hi) {
                    (Some(a), Some(b)) if a < b => domain_points(&ParamDomain::new(vec![Coord::interval(*a, *b)]), &cfg).into_iter().map(|p| p[0]).collect(),
                    _ => return Err("give --x values or an interval --lo < --hi".into()),
                }
            };
            let records: Vec<Value> = xs
                .iter()
                .enumerate()
                .map(|(i, &xv)| point_record(i, &[xv], catalog::rotational_strict_check(&ast, xv, *n).map_err(err).and_then(|r| serde_json::to_value(r).map_err(err))))
                .collect();
            let flag = |key: &str| records.iter().filter(|r| r.get(key) == Some(&Value::Bool(true))).count();
            let summary = json!({"points": records.len(), "errors": error_count(&records), "strict": flag("profile_strict"), "agree": flag("agree")});
            let all_agree = flag("agree") == records.len();
            finish(cfg, records, summary, &["index", "x", "u", "lambda", "mu", "t", "lower_margin", "upper_margin", "curvature_strict", "profile_strict", "agree", "error"], out)?;
            Ok(all_agree)
        }
        Command::ProductWithCurve { curve, g, ell } => {
            let cfg = RunConfig::resolve("product-with-curve", c, false, json!({"curve": curve, "g": g, "ell": ell}))?;
            let curve_spec: CurveSpec = serde_json::from_str(curve).map_err(|e| format!("invalid curve: {e}"))?;
            let g_spec = parse_model(g)?;
            let curve_chart = build_model(&ModelSpec::Curve(curve_spec)).map_err(err)?;
            let g_chart = build_model(&g_spec).map_err(err)?;
            let opts = ProductOptions { seed: cfg.seed, ..ProductOptions::default() };
            let (chart, report) = catalog::product_with_curve(&curve_chart, &g_chart, *ell, &opts).map_err(err)?;
            let points = domain_points(chart.domain(), &cfg);
            let tol = cfg.tol;
            let records: Vec<Value> = points
                .iter()
                .enumerate()
                .map(|(i, u)| {
                    let body = sff_at(&chart, u).map_err(err).and_then(|(_, sff)| {
                        let rep = pinch_check(&invariants(&sff), *ell, 0.0, tol).map_err(err)?;
                        Ok(json!({"S": rep.s, "H": rep.h, "bound": rep.bound, "slack": rep.slack, "verdict": rep.verdict}))
                    });
                    point_record(i, u, body)
                })
                .collect();
            let max_slack = records.iter().filter_map(|r| r.get("slack").and_then(Value::as_f64)).fold(f64::NEG_INFINITY, f64::max);
            let mut summary = serde_json::to_value(&report).map_err(err)?;
            summary["max_slack"] = json!(max_slack);
            summary["errors"] = json!(error_count(&records));
            finish(cfg, records, summary, &["index", "u", "S", "H", "bound", "slack", "verdict", "error"], out)?;
            Ok(true)
        }
        Command::Catalog { action: CatalogAction::List } => {
            let cfg = RunConfig::resolve("catalog list", c, false, json!({}))?;
            let records: Vec<Value> = catalog::catalog_entries().iter().map(|e| serde_json::to_value(e).expect("plain struct")).collect();
            let summary = json!({"models": records.len()});
            let report = Report { version: REPORT_VERSION, config: cfg, records, summary };
            emit(&report, &["id", "params", "ranges", "role"], out).map_err(err)?;
            Ok(true)
        }
    }
}
