mod common;

use ou_lift::analysis::{fit_power_law, lift_variance};
use ou_lift::{build_scheme, error_sweep, fit_rate, l2_error, predicted_rate, ModelParams};
use proptest::prelude::*;

fn scheme(h: f64, n: usize, m: usize) -> ou_lift::QuadratureScheme {
    build_scheme(&ModelParams::new(h, 1.0).unwrap(), n, m, None).unwrap()
}

#[test]
fn oracle_integrator_sanity() {
    let v = common::adaptive(&|x: f64| x.exp(), 0.0, 1.0, 1e-14);
    assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    let mut total = 0.0;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        total += common::adaptive(&|x: f64| x.powf(-0.6), 0.5 * hi, hi, 1e-16);
        hi *= 0.5;
    }
    assert!((total - 2.5).abs() < 1e-9);
}

#[test]
fn closed_form_matches_numeric_integration() {
    for &(h, m, n, t) in &[
        (0.1, 5, 64, 1.0),
        (0.1, 2, 8, 1.0),
        (0.25, 3, 16, 1.0),
        (0.4, 4, 8, 2.5),
    ] {
        let s = scheme(h, n, m);
        let closed = l2_error(&s, t).unwrap().abs_error.powi(2);
        let numeric = common::squared_kernel_distance(&s, t);
        let rel = ((closed - numeric) / numeric).abs();
        assert!(
            rel < 1e-6,
            "H={h} m={m} n={n} T={t}: closed {closed} numeric {numeric}"
        );
    }
}

#[test]
fn kernel_pointwise_error_is_the_truncated_mass() {
    // At t = 1 nearly all of the deficit is the weight lost below xi_0,
    // P(1/2 - H, xi_0) = 0.279272126969871 (mpmath).
    let s = scheme(0.1, 64, 5);
    let deficit = 1.0 - s.kernel_eval(1.0);
    assert!(
        (deficit - 0.279272126969871).abs() < 1e-6,
        "deficit {deficit}"
    );
    let rel = l2_error(&s, 1.0).unwrap().rel_error;
    assert!(deficit < 1.5 * rel);
}

#[test]
fn relative_error_strictly_decreasing() {
    for &(h, m) in &[(0.1, 2), (0.1, 5), (0.25, 3)] {
        let recs = error_sweep(h, m, &[4, 8, 16, 32, 64, 128, 256], 1.0, None).unwrap();
        assert!(
            recs.windows(2).all(|w| w[1].rel_error < w[0].rel_error),
            "H={h} m={m}"
        );
    }
}

#[test]
fn lift_variance_matches_numeric_kernel_norm() {
    let s = scheme(0.25, 8, 3);
    let closed = lift_variance(&s, 1.0);
    let mut numeric = 0.0;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        numeric += common::adaptive(&|u: f64| s.kernel_eval(u).powi(2), 0.5 * hi, hi, 1e-16);
        hi *= 0.5;
    }
    numeric += hi * s.kernel_eval(0.0).powi(2);
    assert!(((closed - numeric) / numeric).abs() < 1e-9);
}

#[test]
fn sweep_parallel_equals_sequential() {
    let ns = [4, 8, 16, 32];
    let par = error_sweep(0.1, 3, &ns, 1.0, None).unwrap();
    let seq: Vec<_> = ns
        .iter()
        .map(|&n| l2_error(&scheme(0.1, n, 3), 1.0).unwrap())
        .collect();
    assert_eq!(par, seq);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    assert_eq!(
        pool.install(|| error_sweep(0.1, 3, &ns, 1.0, None).unwrap()),
        seq
    );
}

#[test]
fn fitted_rates_track_prediction() {
    for &(h, m) in &[(0.1, 2), (0.1, 5), (0.25, 3)] {
        let recs = error_sweep(h, m, &[4, 8, 16, 32, 64, 128, 256], 1.0, None).unwrap();
        let fit = fit_rate(&recs).unwrap();
        let pred = predicted_rate(h, m);
        assert!(
            (fit.slope - pred).abs() <= 0.2 * pred,
            "H={h} m={m}: {} vs {pred}",
            fit.slope
        );
    }
}

proptest! {
    #[test]
    fn fit_slope_is_scale_invariant(
        slope in 0.05f64..3.0,
        scale in 1e-3f64..1e3,
        noise in proptest::collection::vec(-0.05f64..0.05, 5),
    ) {
        let pts: Vec<(f64, f64)> = noise
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let n = 2f64.powi(i as i32 + 1);
                (n, n.powf(-slope) * e.exp())
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|(n, e)| (*n, e * scale)).collect();
        let a = fit_power_law(&pts).unwrap();
        let b = fit_power_law(&scaled).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-10);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() < 1e-10);
        prop_assert!(a.residual >= 0.0);
    }
}
