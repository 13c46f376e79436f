//! Periodic grids, fields and Fourier multipliers.
//!
//! A grid discretizes the box `[-L/2, L/2)^n` with `N` points per axis and
//! stands in for `R^n`. Wavenumbers are angular, `ξ = 2πk/L`, and the
//! unnormalized forward DFT is stored as the spectrum:
//! `F_k = Σ_j f_j e^{-iξ_k (x_j - x_0)}`, `f_j = N^{-n} Σ_k F_k e^{iξ_k (x_j - x_0)}`.
//!
//! Odd-order derivative multipliers drop the Nyquist mode, so real fields stay
//! real and derivatives are exact on band-limited data.

mod field;
mod snapshot;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{ComplexField, Field};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_HEADER_LEN, SNAPSHOT_MAGIC};

/// Largest derivative order accepted by [`apply_derivative`].
pub const DERIVATIVE_CAP: u32 = 6;

/// Fraction of the box length next to the periodic seam that data must avoid.
pub const SEAM_FRACTION: f64 = 0.1;

/// Uniform periodic grid in one or two dimensions.
pub struct Grid {
    dim: usize,
    points: [usize; 2],
    lengths: [f64; 2],
    forward: [Arc<dyn Fft<f64>>; 2],
    inverse: [Arc<dyn Fft<f64>>; 2],
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("points", &&self.points[..self.dim])
            .field("lengths", &&self.lengths[..self.dim])
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.lengths == other.lengths
    }
}

/// Build an isotropic grid with `points` samples on `[-L/2, L/2)` per axis.
pub fn make_grid(dim: usize, box_length: f64, points: usize) -> Result<Arc<Grid>> {
    Grid::new(&vec![box_length; dim.max(1)], &vec![points; dim.max(1)], dim)
}

impl Grid {
    /// Grid with per-axis lengths and point counts.
    pub fn new(lengths: &[f64], points: &[usize], dim: usize) -> Result<Arc<Grid>> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if lengths.len() != dim || points.len() != dim {
            return Err(Error::InvalidGrid("per-axis arrays must match the dimension".into()));
        }
        for (&l, &n) in lengths.iter().zip(points) {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("box length {l} must be positive")));
            }
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "points per axis must be even and at least 8, got {n}"
                )));
            }
        }
        let mut planner = FftPlanner::new();
        let mut pts = [1usize; 2];
        let mut lens = [1.0; 2];
        pts[..dim].copy_from_slice(points);
        lens[..dim].copy_from_slice(lengths);
        let forward = [planner.plan_fft_forward(pts[0]), planner.plan_fft_forward(pts[1])];
        let inverse = [planner.plan_fft_inverse(pts[0]), planner.plan_fft_inverse(pts[1])];
        Ok(Arc::new(Grid { dim, points: pts, lengths: lens, forward, inverse }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self, axis: usize) -> usize {
        self.points[axis]
    }

    pub fn box_length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.points[0] * self.points[1]
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    /// Volume element `Π h_a` for Riemann sums.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Sample coordinates `x_j = -L/2 + j h` along `axis`.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.points[axis]).map(|j| -0.5 * self.lengths[axis] + j as f64 * h).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * std::f64::consts::PI / self.lengths[axis];
        (0..n)
            .map(|k| {
                let kk = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                kk as f64 * dk
            })
            .collect()
    }

    /// Wavenumbers with the Nyquist entry zeroed, used for odd multipliers.
    pub fn odd_wavenumbers(&self, axis: usize) -> Vec<f64> {
        let mut w = self.wavenumbers(axis);
        if self.points[axis] > 1 {
            w[self.points[axis] / 2] = 0.0;
        }
        w
    }

    /// Largest resolved angular wavenumber along `axis`.
    pub fn max_wavenumber(&self, axis: usize) -> f64 {
        std::f64::consts::PI / self.spacing(axis)
    }

    /// Physical point of flat sample index `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let n1 = self.points[1];
        let (i0, i1) = (idx / n1, idx % n1);
        let x0 = -0.5 * self.lengths[0] + i0 as f64 * self.spacing(0);
        let x1 = if self.dim == 2 {
            -0.5 * self.lengths[1] + i1 as f64 * self.spacing(1)
        } else {
            0.0
        };
        [x0, x1]
    }

    /// Wavevector of flat spectral index `idx` (full and Nyquist-free variants).
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let n1 = self.points[1];
        let (k0, k1) = (idx / n1, idx % n1);
        let w = |axis: usize, k: usize| -> f64 {
            let n = self.points[axis];
            if n == 1 {
                return 0.0;
            }
            let kk = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
            kk as f64 * 2.0 * std::f64::consts::PI / self.lengths[axis]
        };
        [w(0, k0), w(1, k1)]
    }

    /// Whether spectral index `idx` is a Nyquist mode along `axis`.
    pub fn is_nyquist(&self, idx: usize, axis: usize) -> bool {
        let n1 = self.points[1];
        let k = if axis == 0 { idx / n1 } else { idx % n1 };
        self.points[axis] > 1 && k == self.points[axis] / 2
    }

    /// Unnormalized forward transform in place.
    pub fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/N` normalization.
    pub fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 2]) {
        assert_eq!(data.len(), self.len());
        let (n0, n1) = (self.points[0], self.points[1]);
        if self.dim == 1 {
            plans[0].process(data);
            return;
        }
        plans[1].process(data);
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, n0, n1);
        plans[0].process(&mut t);
        transpose(&t, data, n1, n0);
    }

    /// Mask of samples lying within `SEAM_FRACTION · L` of the periodic seam.
    pub fn seam_band(&self) -> Vec<bool> {
        (0..self.len())
            .map(|idx| {
                let p = self.point(idx);
                (0..self.dim).any(|a| 0.5 * self.lengths[a] - p[a].abs() < SEAM_FRACTION * self.lengths[a])
            })
            .collect()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 32;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Multi-index of partial derivative orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub [u32; 2]);

impl MultiIndex {
    pub fn new(orders: &[u32]) -> MultiIndex {
        let mut m = [0; 2];
        m[..orders.len()].copy_from_slice(orders);
        MultiIndex(m)
    }

    pub fn order(&self) -> u32 {
        self.0[0] + self.0[1]
    }

    pub fn factorial(&self) -> f64 {
        crate::jet::factorial(self.0[0] as usize) * crate::jet::factorial(self.0[1] as usize)
    }

    pub fn as_usize(&self) -> [usize; 2] {
        [self.0[0] as usize, self.0[1] as usize]
    }

    /// All multi-indices of exactly `order` in `dim` dimensions.
    pub fn of_order(dim: usize, order: u32) -> Vec<MultiIndex> {
        if dim == 1 {
            vec![MultiIndex([order, 0])]
        } else {
            (0..=order).rev().map(|a| MultiIndex([a, order - a])).collect()
        }
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.0[0], self.0[1])
    }
}

/// Dispersive model whose linear part defines the free group `S(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// `∂t u + ∂x1 Δu + u ∂x1 u = 0` in two dimensions.
    Zk,
    /// `∂t u + ∂x³ u + u ∂x u = 0` in one dimension.
    Kdv,
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Zk => 2,
            Model::Kdv => 1,
        }
    }

    /// Per-mode frequency ω with `û(t) = e^{iωt} û(0)` under the linear flow.
    pub fn linear_rates(&self, grid: &Grid) -> Vec<f64> {
        (0..grid.len())
            .map(|idx| {
                let xi = grid.wavevector(idx);
                let x1 = if grid.is_nyquist(idx, 0) { 0.0 } else { xi[0] };
                match self {
                    Model::Kdv => x1 * x1 * x1,
                    Model::Zk => x1 * (xi[0] * xi[0] + xi[1] * xi[1]),
                }
            })
            .collect()
    }
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Model> {
        match s.to_ascii_lowercase().as_str() {
            "zk" => Ok(Model::Zk),
            "kdv" => Ok(Model::Kdv),
            other => Err(Error::InvalidParameter(format!("unknown model '{other}'"))),
        }
    }
}

/// `⟨ξ⟩ = (1 + |ξ|²)^{1/2}`.
pub fn japanese(xi: [f64; 2]) -> f64 {
    (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt()
}

/// Apply a real Fourier multiplier `m(ξ)` and return the real part.
pub fn apply_real_multiplier(f: &Field, m: impl Fn(usize, [f64; 2]) -> Complex64) -> Field {
    let grid = f.grid();
    let spec: Vec<Complex64> = f
        .spectrum()
        .iter()
        .enumerate()
        .map(|(idx, c)| c * m(idx, grid.wavevector(idx)))
        .collect();
    Field::from_spectrum(grid.clone(), spec)
}

/// Bessel potential `J^s f` with multiplier `⟨ξ⟩^s`.
pub fn apply_bessel(f: &Field, s: f64) -> Field {
    apply_real_multiplier(f, |_, xi| Complex64::new(japanese(xi).powf(s), 0.0))
}

/// Spectral multiplier `(iξ)^β` for one flat spectral index.
pub fn derivative_symbol(grid: &Grid, idx: usize, beta: MultiIndex) -> Complex64 {
    let xi = grid.wavevector(idx);
    let mut m = Complex64::new(1.0, 0.0);
    for (axis, (&order, &w)) in beta.0.iter().zip(&xi).take(grid.dim()).enumerate() {
        if order == 0 {
            continue;
        }
        let k = if order % 2 == 1 && grid.is_nyquist(idx, axis) { 0.0 } else { w };
        m *= Complex64::new(0.0, k).powu(order);
    }
    m
}

/// Partial derivative `∂^β f`, exact on band-limited fields.
pub fn apply_derivative(f: &Field, beta: MultiIndex) -> Result<Field> {
    let grid = f.grid();
    if grid.dim() == 1 && beta.0[1] != 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 2 });
    }
    if beta.order() > DERIVATIVE_CAP {
        return Err(Error::DerivativeOrder { order: beta.order(), cap: DERIVATIVE_CAP });
    }
    if beta.order() == 0 {
        return Ok(f.clone());
    }
    Ok(apply_real_multiplier(f, |idx, _| derivative_symbol(grid, idx, beta)))
}

/// Exact linear flow `S(t) f`, a per-mode phase rotation.
pub fn linear_propagate(f: &Field, t: f64, model: Model) -> Result<Field> {
    let grid = f.grid();
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    let rates = model.linear_rates(grid);
    Ok(apply_real_multiplier(f, |idx, _| Complex64::from_polar(1.0, rates[idx] * t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wavenumbers_in_fft_order() {
        let g = make_grid(1, 2.0 * PI, 8).unwrap();
        let w = g.wavenumbers(0);
        let expected = [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn spacing_and_rejections() {
        let g = make_grid(2, 64.0, 128).unwrap();
        assert_eq!(g.spacing(0), 0.5);
        assert_eq!(g.spacing(1), 0.5);
        assert!(make_grid(1, 1.0, 7).is_err());
        assert!(make_grid(1, 1.0, 6).is_err());
        assert!(make_grid(3, 1.0, 8).is_err());
        assert!(make_grid(1, -1.0, 8).is_err());
    }

    #[test]
    fn bessel_constant_and_sine() {
        let g = make_grid(1, 2.0 * PI, 16).unwrap();
        let one = Field::from_fn(g.clone(), |_| 1.0);
        let j = apply_bessel(&one, 3.7);
        assert!(j.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
        let f = Field::from_fn(g, |x| (3.0 * x[0]).sin());
        let j2 = apply_bessel(&f, 2.0);
        for (a, b) in j2.values().iter().zip(f.values()) {
            assert!((a - 10.0 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_derivative_of_product_of_sines() {
        let g = make_grid(2, 2.0 * PI, 16).unwrap();
        let f = Field::from_fn(g.clone(), |x| x[0].sin() * x[1].sin());
        let d = apply_derivative(&f, MultiIndex([1, 1])).unwrap();
        let e = Field::from_fn(g, |x| x[0].cos() * x[1].cos());
        assert!(d.sub(&e).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn derivative_order_cap() {
        let g = make_grid(1, 2.0 * PI, 16).unwrap();
        let f = Field::from_fn(g, |x| x[0].sin());
        assert!(matches!(
            apply_derivative(&f, MultiIndex([7, 0])),
            Err(Error::DerivativeOrder { order: 7, cap: 6 })
        ));
        assert!(apply_derivative(&f, MultiIndex([6, 0])).is_ok());
    }

    #[test]
    fn kdv_single_mode_phase() {
        // û(t) = e^{iξ³t} û(0): cos(ξx) becomes cos(ξx + ξ³t)
        let g = make_grid(1, 2.0 * PI, 32).unwrap();
        let f = Field::from_fn(g.clone(), |x| (2.0 * x[0]).cos());
        let t = 0.3;
        let u = linear_propagate(&f, t, Model::Kdv).unwrap();
        let e = Field::from_fn(g, |x| (2.0 * x[0] + 8.0 * t).cos());
        assert!(u.sub(&e).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zk_linear_flow_is_the_sign_convention() {
        // cos(ξ·x) under ∂t u = -∂x1 Δ u becomes cos(ξ·x + ξ1|ξ|² t)
        let g = make_grid(2, 2.0 * PI, 16).unwrap();
        let f = Field::from_fn(g.clone(), |x| (x[0] + 2.0 * x[1]).cos());
        let t = 0.25;
        let u = linear_propagate(&f, t, Model::Zk).unwrap();
        let e = Field::from_fn(g, |x| (x[0] + 2.0 * x[1] + 5.0 * t).cos());
        assert!(u.sub(&e).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn model_dimension_checked() {
        let g = make_grid(1, 10.0, 16).unwrap();
        let f = Field::zeros(g);
        assert!(linear_propagate(&f, 1.0, Model::Zk).is_err());
    }

    #[test]
    fn fft_roundtrip_2d() {
        let g = make_grid(2, 5.0, 8).unwrap();
        let mut data: Vec<Complex64> =
            (0..g.len()).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
        let orig = data.clone();
        g.fft_forward(&mut data);
        g.fft_inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
