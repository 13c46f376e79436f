//! Cutoff family, exponential approximants and truncated weights.

use ddlab_core::jet::Jet;
use ddlab_core::weights::{build_cutoff_family, exp_weight_family, truncated_weight, PolyWeight};
use proptest::prelude::*;

fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    // fourth-order stencil
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partition_of_unity(eps in 0.05f64..2.0, ratio in 5.0f64..20.0, s in -50.0f64..80.0) {
        let c = build_cutoff_family(eps, ratio * eps).unwrap();
        prop_assert!((c.chi(s) + c.phi(s) + c.psi(s) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn chi_is_nondecreasing_and_bounded(eps in 0.05f64..2.0, ratio in 5.0f64..20.0, s in -10.0f64..60.0, ds in 0.0f64..3.0) {
        let c = build_cutoff_family(eps, ratio * eps).unwrap();
        prop_assert!(c.chi(s) <= c.chi(s + ds) + 1e-15);
        prop_assert!((0.0..=1.0).contains(&c.chi(s)));
    }

    #[test]
    fn chi_derivative_matches_difference(eps in 0.2f64..2.0, ratio in 5.0f64..20.0, u in 0.0f64..1.0) {
        let c = build_cutoff_family(eps, ratio * eps).unwrap();
        let s = eps + u * (ratio * eps - eps);
        let fd = central_difference(|y| c.chi(y), s, 1e-3 * eps);
        prop_assert!((c.chi_derivative(s, 1) - fd).abs() < 1e-6 * (1.0 + fd.abs()) / eps);
    }

    #[test]
    fn p_derivative_identity(b in 0.1f64..2.0, eta in 0.0f64..1.0, x in -5.0f64..5.0) {
        let fam = exp_weight_family(b, eta).unwrap();
        let dp = fam.p_jet(&Jet::var(x, 0)).derivative([1, 0]);
        let rho = fam.rho(x);
        prop_assert!((dp - 2.0 * b * rho * rho).abs() <= 1e-12 * (1.0 + dp.abs()));
        let fd = central_difference(|y| fam.p(y), x, 1e-3);
        prop_assert!((dp - fd).abs() <= 1e-7 * (1.0 + dp.abs()));
    }

    #[test]
    fn q_eta_increases_to_exponential(b in 0.1f64..1.5, x in -4.0f64..4.0) {
        let mut prev = 0.0;
        for eta in [1.0, 0.1, 1e-2, 1e-3, 1e-4, 0.0] {
            let q = exp_weight_family(b, eta).unwrap().q(x);
            prop_assert!(q >= prev);
            prev = q;
        }
        prop_assert!((prev - (b * x).exp()).abs() <= 1e-12 * (b * x).exp());
    }

    #[test]
    fn truncated_weight_invariants(n in 1.0f64..16.0, x in -80.0f64..80.0, y in -80.0f64..80.0, t in 0.0f64..1.0) {
        let w = truncated_weight(n, 2).unwrap();
        let r = x.hypot(y);
        let v = w.eval(&[x, y]);
        if r <= n {
            prop_assert!((v - (1.0 + r * r).sqrt()).abs() < 1e-12);
        }
        if r >= 3.0 * n {
            prop_assert!((v - 2.0 * n).abs() < 1e-12);
        }
        // nondecreasing along rays
        let inner = w.eval(&[t * x, t * y]);
        prop_assert!(inner <= v + 1e-12);
        let grad = w.jet(&Jet::point(&[x, y]));
        let g = grad.derivative([1, 0]).hypot(grad.derivative([0, 1]));
        prop_assert!(g <= 1.0 + 1e-12);
    }

    #[test]
    fn poly_weight_vanishes_outside_region(r in 0.0f64..3.0, x in -20.0f64..20.0, t in 0.0f64..1.0) {
        let c = build_cutoff_family(1.0, 6.0).unwrap();
        let w = PolyWeight::new(r, c, [1.0, 0.0], 0.5, -2.0);
        let s = x + 0.5 * t - 2.0;
        let v = ddlab_core::weights::eval_poly_weight(&w, &[x, 0.0], t);
        if s <= 1.0 {
            prop_assert_eq!(v, 0.0);
        }
        if s >= 6.0 {
            prop_assert!((v - (1.0 + s * s).powf(0.5 * r)).abs() < 1e-12 * (1.0 + v));
        }
    }
}

#[test]
fn cutoff_report_passes() {
    for (eps, tau) in [(0.5, 5.0), (1.0, 5.0), (1.0, 15.0), (3.0, 15.0)] {
        let c = build_cutoff_family(eps, tau).unwrap();
        let rep = c.verify(4001);
        assert!(rep.all_passed(), "{:?}", rep.properties);
    }
}

#[test]
fn tau_below_five_eps_is_rejected() {
    assert!(build_cutoff_family(1.0, 4.9).is_err());
    assert!(build_cutoff_family(0.0, 4.0).is_err());
}

#[test]
fn truncated_weight_derivatives_plateau() {
    let xs: Vec<f64> = (0..=600).map(|i| -60.0 + 0.2 * i as f64).collect();
    for r in [0.25, 0.5, 0.75] {
        for alpha in [[1, 0], [2, 0], [1, 1], [3, 0], [2, 1]] {
            let sups: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
                .iter()
                .map(|&n| {
                    let w = truncated_weight(n, 2).unwrap();
                    xs.iter().map(|&x| w.power_derivative(r, &[x, 0.3 * x], alpha).abs()).fold(0.0, f64::max)
                })
                .collect();
            // bounded uniformly in N: no growth beyond the small-N value
            let first = sups[0];
            assert!(sups.iter().all(|s| *s <= 1.5 * first + 1e-12), "r={r} alpha={alpha:?} {sups:?}");
        }
    }
}
