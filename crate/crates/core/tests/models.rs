use std::f64::consts::FRAC_1_SQRT_2;

use pinch_core::catalog::{build_model, catalog_entries, ModelSpec};
use pinch_core::engine::{fd_jet, invariants, sff_at};
use pinch_core::pinch::{pinch_check, Verdict, EQUALITY_TOL};
use pinch_core::verify::gauss_models;
use proptest::prelude::*;

#[test]
fn closed_form_jets_match_finite_differences() {
    for spec in gauss_models() {
        let chart = build_model(&spec).unwrap();
        let mut worst: f64 = 0.0;
        for u in chart.domain().random_points(100, 11) {
            let exact = chart.jet(&u).unwrap();
            let fd = fd_jet(chart.n(), |v| chart.position(v), &u, true).unwrap();
            let scale = 1.0 + exact.position().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            worst = worst.max(exact.max_abs_diff(&fd) / scale);
        }
        assert!(worst <= 1e-5, "{}: {worst:.2e}", spec.id());
    }
}

#[test]
fn every_catalog_id_has_an_entry() {
    let ids: Vec<&str> = catalog_entries().iter().map(|e| e.id).collect();
    for spec in gauss_models() {
        assert!(ids.contains(&spec.id()));
    }
    assert_eq!(ids.len(), 8);
}

#[test]
fn sphere_product_equality_in_r6() {
    for (r, big_r) in [(0.3, 1.0), (0.7, 1.0), (1.0, 2.5)] {
        let chart = build_model(&ModelSpec::SphereProduct { k: 2, r, big_r, placement: Default::default() }).unwrap();
        for u in chart.domain().random_points(30, 2) {
            let rep = pinch_check(&invariants(&sff_at(&chart, &u).unwrap().1), 2, 0.0, EQUALITY_TOL).unwrap();
            assert!(rep.slack.abs() <= 1e-8 * (1.0 + rep.bound), "{rep:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Tori with k <= n/2: equality when r >= sqrt(k/n) or n = 2k, violated
    // otherwise. With k > n/2 the bound is symmetric under k <-> n-k and
    // T(n,k,r) = T(n,n-k,sqrt(1-r^2)), so the inequality flips: equality iff
    // r <= sqrt(k/n).
    #[test]
    fn clifford_torus_verdicts(n in 3usize..8, k_off in 0usize..6, t in 0.05f64..0.95, seed in 0u64..1000) {
        let k = 1 + k_off % (n - 1);
        let threshold = (k as f64 / n as f64).sqrt();
        let chart = build_model(&ModelSpec::CliffordTorus { n, k, r: t }).unwrap();
        let u = chart.domain().random_points(1, seed).remove(0);
        let rep = pinch_check(&invariants(&sff_at(&chart, &u).unwrap().1), k, 1.0, EQUALITY_TOL).unwrap();
        let equality = if 2 * k == n { true } else if 2 * k < n { t >= threshold } else { t <= threshold };
        if equality {
            prop_assert!(rep.slack.abs() <= 1e-8 * (1.0 + rep.bound), "{:?}", rep);
        } else {
            prop_assert_eq!(rep.verdict, Verdict::Violated);
        }
    }
}

#[test]
fn torus_at_threshold_is_equality() {
    for (n, k) in [(3, 1), (5, 2), (5, 3), (7, 2)] {
        let r = (k as f64 / n as f64).sqrt();
        let chart = build_model(&ModelSpec::CliffordTorus { n, k, r }).unwrap();
        for u in chart.domain().random_points(10, 5) {
            let rep = pinch_check(&invariants(&sff_at(&chart, &u).unwrap().1), k, 1.0, EQUALITY_TOL).unwrap();
            assert!(rep.slack.abs() <= 1e-8, "n={n} k={k}: {rep:?}");
        }
    }
    let chart = build_model(&ModelSpec::CliffordTorus { n: 4, k: 2, r: FRAC_1_SQRT_2 }).unwrap();
    let inv = invariants(&sff_at(&chart, &[1.0, 2.0, 0.5, 3.0]).unwrap().1);
    assert!((inv.s - 4.0).abs() < 1e-12 && inv.h < 1e-12);
}

#[test]
fn cp2_points_admit_adapted_frames() {
    use pinch_core::curvature::{adapted_frame, normal_curvature};
    use pinch_core::frameopt::FrameSettings;
    let chart = build_model(&ModelSpec::Cp2Veronese { r: 1.0 }).unwrap();
    for u in chart.domain().random_points(10, 3) {
        let sff = sff_at(&chart, &u).unwrap().1;
        assert!(!normal_curvature(&sff).flat);
        let af = adapted_frame(&sff, &FrameSettings { restarts: 4, ..FrameSettings::default() }).unwrap();
        assert!(af.residuals.max() <= 1e-9, "{:?}", af.residuals);
    }
}
