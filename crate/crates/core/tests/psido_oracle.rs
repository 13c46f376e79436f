//! Quantization against a dense matrix built straight from the symbol.

use std::f64::consts::PI;
use std::sync::Arc;

use ddlab_core::psido::{quantize_apply, Symbol};
use ddlab_core::weights::build_cutoff_family;
use ddlab_core::{ComplexField, Field, Grid};
use num_complex::Complex64;
use proptest::prelude::*;

/// FFT-ordered angular wavenumbers, Nyquist at `-N/2`.
fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    (0..n).map(|k| if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * 2.0 * PI / l).collect()
}

/// `(Ψ_a f)(x_j) = N^{-d} Σ_k Σ_l a(x_j, ξ_k) e^{iξ_k·(x_j - x_l)} f(x_l)`.
fn dense_oracle(a: &Symbol, g: &Arc<Grid>, f: &[f64]) -> Vec<Complex64> {
    let dim = g.dim();
    let n0 = g.points(0);
    let n1 = if dim == 2 { g.points(1) } else { 1 };
    let xs0: Vec<f64> = (0..n0).map(|j| -0.5 * g.box_length(0) + j as f64 * g.box_length(0) / n0 as f64).collect();
    let xs1: Vec<f64> =
        if dim == 2 { (0..n1).map(|j| -0.5 * g.box_length(1) + j as f64 * g.box_length(1) / n1 as f64).collect() } else { vec![0.0] };
    let k0 = wavenumbers(n0, g.box_length(0));
    let k1 = if dim == 2 { wavenumbers(n1, g.box_length(1)) } else { vec![0.0] };
    let pts: Vec<[f64; 2]> = xs0.iter().flat_map(|&a| xs1.iter().map(move |&b| [a, b])).collect();
    let wvs: Vec<[f64; 2]> = k0.iter().flat_map(|&a| k1.iter().map(move |&b| [a, b])).collect();
    let total = pts.len() as f64;
    pts.iter()
        .map(|x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for xi in &wvs {
                let sym = a.eval(x, xi);
                let mut inner = Complex64::new(0.0, 0.0);
                for (y, fv) in pts.iter().zip(f) {
                    let phase = xi[0] * (x[0] - y[0]) + xi[1] * (x[1] - y[1]);
                    inner += Complex64::from_polar(*fv, phase);
                }
                acc += sym * inner;
            }
            acc / total
        })
        .collect()
}

fn max_diff(a: &ComplexField, b: &[Complex64]) -> f64 {
    a.values().iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

fn catalog(dim: usize) -> Vec<Symbol> {
    let sigma = if dim == 2 { [1.0, 0.5] } else { [1.0, 0.0] };
    let cut = build_cutoff_family(0.5, 4.0).unwrap();
    vec![
        Symbol::identity(dim),
        Symbol::bessel(dim, 1.5),
        Symbol::bracket_bessel(dim, 1.0, 1.0, sigma, 0.3),
        Symbol::cutoff_bracket_bessel(dim, 2.0, -1.0, sigma, 1.0, cut),
        Symbol::general("x xi mix", dim, (1.0, 1.0), sigma, 0.0, |x, xi| {
            Complex64::new((1.0 + (x[0] * xi[0]).powi(2) + (x[1] * xi[1]).powi(2)).sqrt(), 0.2 * x[0].sin() * xi[0])
        }),
    ]
}

fn sample_data(g: &Arc<Grid>) -> Field {
    Field::from_fn(g.clone(), |x| (-(x[0] - 0.7).powi(2) / 3.0 - x[1] * x[1] / 4.0).exp() * (1.0 + 0.3 * x[0].cos()))
}

#[test]
fn dense_oracle_agrees_1d() {
    let g = Grid::new(&[12.0], &[16], 1).unwrap();
    let f = sample_data(&g);
    for a in catalog(1) {
        let fast = quantize_apply(&a, &f).unwrap();
        let err = max_diff(&fast, &dense_oracle(&a, &g, f.values()));
        assert!(err < 1e-10, "{}: {err:e}", a.label);
    }
}

#[test]
fn dense_oracle_agrees_2d() {
    let g = Grid::new(&[12.0, 10.0], &[16, 16], 2).unwrap();
    let f = sample_data(&g);
    for a in catalog(2) {
        let fast = quantize_apply(&a, &f).unwrap();
        let err = max_diff(&fast, &dense_oracle(&a, &g, f.values()));
        assert!(err < 1e-10, "{}: {err:e}", a.label);
    }
}

#[test]
fn bessel_matches_multiplier() {
    let g = Grid::new(&[20.0], &[64], 1).unwrap();
    let f = sample_data(&g);
    let via_symbol = quantize_apply(&Symbol::bessel(1, 2.0), &f).unwrap();
    let wv = wavenumbers(64, 20.0);
    let direct = ddlab_core::spectral::apply_real_multiplier(&f, |k, _| Complex64::new(1.0 + wv[k] * wv[k], 0.0));
    let err = via_symbol.values().iter().zip(direct.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quantization_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, shift in -2.0f64..2.0) {
        let g = Grid::new(&[16.0], &[32], 1).unwrap();
        let f = sample_data(&g);
        let h = Field::from_fn(g.clone(), |x| (-(x[0] - shift).powi(2)).exp());
        let a = Symbol::bracket_bessel(1, 1.0, 1.0, [1.0, 0.0], shift);
        let combo = f.scale(c1).add(&h.scale(c2)).unwrap();
        let lhs = quantize_apply(&a, &combo).unwrap();
        let rhs = quantize_apply(&a, &f).unwrap().scale(c1.into()).add(&quantize_apply(&a, &h).unwrap().scale(c2.into()));
        let scale = 1.0 + lhs.norm();
        prop_assert!(lhs.sub(&rhs).norm() / scale < 1e-12);
    }

    #[test]
    fn x_only_symbol_is_multiplication(q in -2.0f64..2.0, omega in -3.0f64..3.0) {
        let g = Grid::new(&[16.0, 12.0], &[16, 16], 2).unwrap();
        let f = sample_data(&g);
        let a = Symbol::bracket(2, q, [1.0, 0.5], omega);
        let out = quantize_apply(&a, &f).unwrap();
        for (i, (o, v)) in out.values().iter().zip(f.values()).enumerate() {
            let x = g.point(i);
            let w = (1.0 + (x[0] + 0.5 * x[1] + omega).powi(2)).powf(0.5 * q);
            prop_assert!((o - Complex64::new(w * v, 0.0)).norm() < 1e-11 * (1.0 + w));
        }
    }
}
