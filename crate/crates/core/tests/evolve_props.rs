//! Solver convergence order, conservation and spectral identities.

use ddlab_core::evolve::{conserved, kdv_soliton, translate, Dealias, Integrator, Solver, SolverConfig};
use ddlab_core::spectral::{apply_bessel, apply_derivative, linear_propagate};
use ddlab_core::{make_grid, Field, Model, MultiIndex};
use proptest::prelude::*;

fn soliton_error(dt: f64, integrator: Integrator, points: usize) -> f64 {
    let g = make_grid(1, 50.0, points).unwrap();
    let u0 = kdv_soliton(&g, 1.0, -5.0, 0.0);
    let cfg = SolverConfig { integrator, ..SolverConfig::new(Model::Kdv, dt, 1.0) };
    let traj = Solver::new(&g, cfg).unwrap().run(&u0).unwrap();
    traj.last().sub(&kdv_soliton(&g, 1.0, -5.0, 1.0)).unwrap().max_abs()
}

#[test]
fn etdrk4_is_fourth_order() {
    let errs: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| soliton_error(dt, Integrator::Etdrk4, 256)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 8.0, "{errs:?}");
    }
}

#[test]
fn imex_reference_is_second_order() {
    let errs: Vec<f64> = [0.01, 0.005].iter().map(|&dt| soliton_error(dt, Integrator::ImexCn, 128)).collect();
    let ratio = errs[0] / errs[1];
    assert!(ratio > 3.0 && ratio < 5.0, "{errs:?}");
}

#[test]
fn l2_is_conserved_with_and_without_dealiasing() {
    let g = make_grid(1, 60.0, 256).unwrap();
    let u0 = Field::from_fn(g.clone(), |x| 1.5 * (-x[0] * x[0] / 4.0).exp());
    for dealias in [Dealias::TwoThirds, Dealias::None] {
        let cfg = SolverConfig { dealias, ..SolverConfig::new(Model::Kdv, 0.01, 2.0) };
        let traj = Solver::new(&g, cfg).unwrap().run(&u0).unwrap();
        assert!(traj.l2_drift() < 1e-8, "{dealias:?}: {:e}", traj.l2_drift());
        let m0 = conserved(&u0).mass;
        assert!((conserved(traj.last()).mass - m0).abs() < 1e-10 * (1.0 + m0.abs()));
    }
}

#[test]
fn zk_invariants_hold_briefly() {
    let g = make_grid(2, 40.0, 64).unwrap();
    let u0 = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 6.0).exp());
    let traj = Solver::new(&g, SolverConfig::new(Model::Zk, 0.01, 0.5)).unwrap().run(&u0).unwrap();
    assert!(traj.l2_drift() < 1e-8);
    assert!(traj.hamiltonian_drift() < 1e-5);
}

#[test]
fn linear_flow_is_a_group() {
    let g = make_grid(2, 30.0, 32).unwrap();
    let f = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1]) / 3.0).exp());
    let a = linear_propagate(&linear_propagate(&f, 0.3, Model::Zk).unwrap(), 0.4, Model::Zk).unwrap();
    let b = linear_propagate(&f, 0.7, Model::Zk).unwrap();
    assert!(a.sub(&b).unwrap().max_abs() < 1e-13);
    let back = linear_propagate(&b, -0.7, Model::Zk).unwrap();
    assert!(back.sub(&f).unwrap().max_abs() < 1e-13);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derivatives_of_trig_polynomials(k in 1u32..6, phase in 0.0..std::f64::consts::TAU) {
        let l = 20.0;
        let g = make_grid(1, l, 32).unwrap();
        let w = 2.0 * std::f64::consts::PI * k as f64 / l;
        let f = Field::from_fn(g.clone(), |x| (w * x[0] + phase).sin());
        let d3 = apply_derivative(&f, MultiIndex([3, 0])).unwrap();
        let exact = Field::from_fn(g.clone(), |x| -w.powi(3) * (w * x[0] + phase).cos());
        prop_assert!(d3.sub(&exact).unwrap().max_abs() < 1e-11);
    }

    #[test]
    fn bessel_potentials_compose(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let g = make_grid(2, 20.0, 32).unwrap();
        let f = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let lhs = apply_bessel(&apply_bessel(&f, a), b);
        let rhs = apply_bessel(&f, a + b);
        prop_assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn parseval(seed in 0u64..1000) {
        let g = make_grid(2, 16.0, 16).unwrap();
        let f = Field::from_fn(g.clone(), |x| ((seed as f64 + 1.0) * x[0]).sin() * (-(x[1] * x[1])).exp());
        prop_assert!((f.norm() - f.spectral_norm()).abs() < 1e-12 * (1.0 + f.norm()));
    }

    #[test]
    fn translation_commutes_with_flow(shift in -3.0f64..3.0) {
        let g = make_grid(1, 60.0, 256).unwrap();
        let u0 = kdv_soliton(&g, 1.0, 0.0, 0.0);
        let s = Solver::new(&g, SolverConfig::new(Model::Kdv, 0.02, 0.2)).unwrap();
        let a = translate(s.run(&u0).unwrap().last(), [shift, 0.0]);
        let b = s.run(&translate(&u0, [shift, 0.0])).unwrap();
        prop_assert!(a.sub(b.last()).unwrap().max_abs() < 1e-10);
    }
}

#[test]
fn dealiasing_changes_drift_on_under_resolved_runs() {
    let g = make_grid(1, 40.0, 64).unwrap();
    let u0 = kdv_soliton(&g, 4.0, 0.0, 0.0);
    let drift = |dealias| {
        let cfg = SolverConfig { dealias, ..SolverConfig::new(Model::Kdv, 0.001, 1.0) };
        Solver::new(&g, cfg).unwrap().run(&u0).unwrap().l2_drift()
    };
    let (on, off) = (drift(Dealias::TwoThirds), drift(Dealias::None));
    assert!(on < 1e-9, "{on:e}");
    assert!(off > 1e3 * on, "on {on:e} off {off:e}");
}
