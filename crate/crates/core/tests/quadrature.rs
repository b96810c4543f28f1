use ou_lift::quadrature::{default_rate, SchemeDocument};
use ou_lift::{
    build_scheme, gauss_rule_weighted, geometric_grid, weighted_moments, ModelParams,
    QuadratureScheme,
};
use proptest::prelude::*;

fn params(h: f64) -> ModelParams {
    ModelParams::new(h, 1.0).unwrap()
}

#[test]
fn grid_endpoints_for_reference_points() {
    let g = geometric_grid(&params(0.1), 4, 2.0 * 0.1 * 2.0 / 3.0).unwrap();
    assert!((g.lower() - 4f64.powf(-(0.4 / 3.0) / 0.4)).abs() < 1e-14);
    assert!((g.upper() - 4f64.powf((0.4 / 3.0) / 0.1)).abs() < 1e-12);
    assert_eq!(g.xi.len(), 5);
}

#[test]
fn gauss_nodes_are_interior_and_weights_positive() {
    for &h in &[0.05, 0.1, 0.25, 0.45] {
        for m in 1..=10 {
            let s = build_scheme(&params(h), 8, m, None).unwrap();
            assert_eq!(s.len(), 8 * m);
            for i in 0..s.n {
                let (a, b) = s.grid.interval(i);
                let (x, w) = s.interval_rule(i);
                assert!(
                    x.iter().all(|&x| x > a && x < b),
                    "H={h} m={m} interval {i}"
                );
                assert!(w.iter().all(|&w| w > 0.0));
                assert!(x.windows(2).all(|p| p[0] < p[1]));
            }
        }
    }
}

#[test]
fn weighted_rule_integrates_polynomials() {
    let (a, b, alpha) = (0.3, 7.0, 0.85);
    let m = 6;
    let (x, w) = gauss_rule_weighted(a, b, alpha, m).unwrap();
    let mom = weighted_moments(a, b, alpha, 2 * m).unwrap();
    for (k, mk) in mom.iter().enumerate() {
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
        assert!(((q - mk) / mk).abs() < 1e-10, "k={k}");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(ModelParams::new(0.5, 1.0)
        .unwrap_err()
        .is_invalid_argument());
    assert!(ModelParams::new(0.0, 1.0)
        .unwrap_err()
        .is_invalid_argument());
    assert!(ModelParams::new(0.1, 0.0)
        .unwrap_err()
        .is_invalid_argument());
    assert!(build_scheme(&params(0.1), 0, 2, None)
        .unwrap_err()
        .is_invalid_argument());
    assert!(build_scheme(&params(0.1), 1, 2, None)
        .unwrap_err()
        .is_invalid_argument());
    assert!(build_scheme(&params(0.1), 4, 0, None)
        .unwrap_err()
        .is_invalid_argument());
    assert!(build_scheme(&params(0.1), 4, 2, Some(-1.0))
        .unwrap_err()
        .is_invalid_argument());
    assert!(gauss_rule_weighted(2.0, 1.0, 0.6, 2)
        .unwrap_err()
        .is_invalid_argument());
}

#[test]
fn json_document_round_trips() {
    let s = build_scheme(&params(0.25), 16, 3, None).unwrap();
    let text = s.to_json();
    let doc: SchemeDocument = serde_json::from_str(&text).unwrap();
    assert_eq!(doc.nodes.len(), 48);
    assert_eq!(QuadratureScheme::from_json(&text).unwrap(), s);
    assert_eq!(s.r, default_rate(0.25, 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grid_is_log_equidistant(h in 0.02f64..0.48, n in 2usize..200, r in 0.05f64..2.0) {
        let g = geometric_grid(&params(h), n, r).unwrap();
        prop_assert_eq!(g.xi.len(), n + 1);
        let step = (g.upper() / g.lower()).ln() / n as f64;
        for w in g.xi.windows(2) {
            prop_assert!(w[1] > w[0]);
            prop_assert!(((w[1] / w[0]).ln() - step).abs() < 1e-9 * step.max(1.0));
        }
    }

    #[test]
    fn gauss_rule_is_scale_covariant(
        a in 0.01f64..10.0,
        ratio in 1.01f64..1e4,
        alpha in 0.5f64..0.99,
        m in 1usize..8,
        scale in 1e-3f64..1e3,
    ) {
        let b = a * ratio;
        let (x, w) = gauss_rule_weighted(a, b, alpha, m).unwrap();
        let (xs, ws) = gauss_rule_weighted(scale * a, scale * b, alpha, m).unwrap();
        let f = scale.powf(1.0 - alpha);
        for j in 0..m {
            prop_assert!((xs[j] / (scale * x[j]) - 1.0).abs() < 1e-9);
            prop_assert!((ws[j] / (f * w[j]) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn built_schemes_are_moment_exact(h in 0.03f64..0.47, n in 2usize..64, m in 1usize..=10) {
        let s = build_scheme(&params(h), n, m, None).unwrap();
        prop_assert!(s.max_moment_residual() <= 1e-8);
    }
}
