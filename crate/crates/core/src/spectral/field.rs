use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use super::Grid;
use crate::error::{Error, Result};

/// Real samples on a grid with a lazily cached spectrum.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Field { grid, values, spectrum: OnceLock::new() })
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.len();
        Field { grid, values: vec![0.0; n], spectrum: OnceLock::new() }
    }

    /// Sample `f` at every grid point (`x[1]` is 0 on 1D grids).
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64; 2]) -> f64) -> Field {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Field { grid, values, spectrum: OnceLock::new() }
    }

    /// Real part of the inverse transform of `spectrum`.
    pub fn from_spectrum(grid: Arc<Grid>, mut spectrum: Vec<Complex64>) -> Field {
        grid.fft_inverse(&mut spectrum);
        let values = spectrum.iter().map(|c| c.re).collect();
        Field { grid, values, spectrum: OnceLock::new() }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Unnormalized forward DFT, computed once.
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| {
            let mut data: Vec<Complex64> =
                self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.grid.fft_forward(&mut data);
            data
        })
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    /// L² norm as a Riemann sum.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// L² norm from the spectrum (Parseval).
    pub fn spectral_norm(&self) -> f64 {
        let s: f64 = self.spectrum().iter().map(|c| c.norm_sqr()).sum();
        (s * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect()).unwrap()
    }

    /// Pointwise `f(x, u(x))`.
    pub fn map_with_point(&self, f: impl Fn(&[f64; 2], f64) -> f64) -> Field {
        let values =
            self.values.iter().enumerate().map(|(i, &v)| f(&self.grid.point(i), v)).collect();
        Field::new(self.grid.clone(), values).unwrap()
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Field::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(|v| v * s)
    }

    /// Pointwise product with raw samples on the same grid.
    pub fn mul_samples(&self, w: &[f64]) -> Field {
        assert_eq!(w.len(), self.values.len());
        Field::new(self.grid.clone(), self.values.iter().zip(w).map(|(a, b)| a * b).collect())
            .unwrap()
    }

    /// Trigonometric interpolant evaluated at an arbitrary point.
    pub fn interpolate(&self, p: &[f64]) -> f64 {
        let g = &*self.grid;
        let spec = self.spectrum();
        let phase = |axis: usize| -> Vec<Complex64> {
            let n = g.points(axis);
            if n == 1 {
                return vec![Complex64::new(1.0, 0.0)];
            }
            let dx = p[axis] + 0.5 * g.box_length(axis);
            g.wavenumbers(axis)
                .iter()
                .enumerate()
                .map(|(k, &xi)| {
                    if k == n / 2 {
                        Complex64::new((xi * dx).cos(), 0.0)
                    } else {
                        Complex64::from_polar(1.0, xi * dx)
                    }
                })
                .collect()
        };
        let e0 = phase(0);
        let e1 = phase(1);
        let n1 = g.points(1);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k0, a) in e0.iter().enumerate() {
            let row = &spec[k0 * n1..(k0 + 1) * n1];
            let inner: Complex64 = row.iter().zip(&e1).map(|(c, b)| c * b).sum();
            acc += a * inner;
        }
        acc.re / g.len() as f64
    }

    /// Samples of `x ↦ u(factor · x)` via separable trigonometric
    /// interpolation. The field is taken to vanish outside the box, so points
    /// mapped beyond it read zero instead of a periodic image.
    pub fn resample_scaled(&self, factor: f64) -> Field {
        let g = &*self.grid;
        let mut data: Vec<Complex64> =
            self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for axis in 0..g.dim() {
            let n = g.points(axis);
            let xs = g.coords(axis);
            let xi = g.wavenumbers(axis);
            let half = 0.5 * g.box_length(axis);
            // interpolation matrix E[j][k] with the Nyquist mode as a cosine
            let mat: Vec<Complex64> = xs
                .iter()
                .flat_map(|&x| {
                    let dx = factor * x + half;
                    let inside = (0.0..2.0 * half).contains(&dx);
                    xi.iter().enumerate().map(move |(k, &w)| {
                        if !inside {
                            Complex64::new(0.0, 0.0)
                        } else if k == n / 2 {
                            Complex64::new((w * dx).cos() / n as f64, 0.0)
                        } else {
                            Complex64::from_polar(1.0 / n as f64, w * dx)
                        }
                    })
                })
                .collect();
            let plan = rustfft::FftPlanner::new().plan_fft_forward(n);
            data = apply_along_axis(g, &data, axis, |line| {
                let mut spec = line.to_vec();
                plan.process(&mut spec);
                (0..n)
                    .map(|j| mat[j * n..(j + 1) * n].iter().zip(&spec).map(|(a, b)| a * b).sum())
                    .collect()
            });
        }
        Field::new(self.grid.clone(), data.iter().map(|c| c.re).collect()).unwrap()
    }

    fn check(&self, other: &Field) -> Result<()> {
        if *self.grid != *other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

fn apply_along_axis(
    g: &Grid,
    data: &[Complex64],
    axis: usize,
    f: impl Fn(&[Complex64]) -> Vec<Complex64>,
) -> Vec<Complex64> {
    let (n0, n1) = (g.points(0), g.points(1));
    let mut out = data.to_vec();
    if axis == 1 {
        for r in 0..n0 {
            let line = f(&data[r * n1..(r + 1) * n1]);
            out[r * n1..(r + 1) * n1].copy_from_slice(&line);
        }
    } else {
        for c in 0..n1 {
            let col: Vec<Complex64> = (0..n0).map(|r| data[r * n1 + c]).collect();
            let line = f(&col);
            for r in 0..n0 {
                out[r * n1 + c] = line[r];
            }
        }
    }
    out
}

/// Complex samples on a grid, used by operator calculus.
#[derive(Clone, Debug)]
pub struct ComplexField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<ComplexField> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid("sample count does not match grid".into()));
        }
        Ok(ComplexField { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut d = self.values.clone();
        self.grid.fft_forward(&mut d);
        d
    }

    pub fn from_spectrum(grid: Arc<Grid>, mut spec: Vec<Complex64>) -> ComplexField {
        grid.fft_inverse(&mut spec);
        ComplexField { grid, values: spec }
    }

    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn sub(&self, other: &ComplexField) -> ComplexField {
        assert!(*self.grid == *other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        ComplexField { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &ComplexField) -> ComplexField {
        assert!(*self.grid == *other.grid);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        ComplexField { grid: self.grid.clone(), values }
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        ComplexField { grid: self.grid.clone(), values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Pointwise product with real samples.
    pub fn mul_samples(&self, w: &[f64]) -> ComplexField {
        assert_eq!(w.len(), self.values.len());
        let values = self.values.iter().zip(w).map(|(a, b)| a * b).collect();
        ComplexField { grid: self.grid.clone(), values }
    }

    pub fn real(&self) -> Field {
        Field::new(self.grid.clone(), self.values.iter().map(|c| c.re).collect()).unwrap()
    }

    pub fn imag_norm(&self) -> f64 {
        (self.values.iter().map(|c| c.im * c.im).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }
}

impl From<&Field> for ComplexField {
    fn from(f: &Field) -> ComplexField {
        ComplexField {
            grid: f.grid().clone(),
            values: f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn interpolation_reproduces_band_limited_field() {
        let g = make_grid(2, 2.0 * PI, 16).unwrap();
        let f = Field::from_fn(g, |x| (x[0]).sin() * (2.0 * x[1]).cos() + 0.3);
        let p: [f64; 2] = [0.123, -1.7];
        let exact = p[0].sin() * (2.0 * p[1]).cos() + 0.3;
        assert!((f.interpolate(&p) - exact).abs() < 1e-13);
    }

    #[test]
    fn scaled_resampling_of_gaussian() {
        let g = make_grid(2, 30.0, 64).unwrap();
        let f = Field::from_fn(g.clone(), |x| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        let r = f.resample_scaled(1.3);
        let e = Field::from_fn(g, |x| (-1.69 * (x[0] * x[0] + x[1] * x[1]) / 2.0).exp());
        assert!(r.sub(&e).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn scaled_resampling_does_not_wrap() {
        let g = make_grid(1, 64.0, 64).unwrap();
        let f = Field::from_fn(g.clone(), |x| (-(x[0] - 1.0).powi(2)).exp());
        let r = f.resample_scaled(2.0);
        let e = Field::from_fn(g, |x| (-(2.0 * x[0] - 1.0).powi(2)).exp());
        assert!(r.sub(&e).unwrap().max_abs() < 1e-12);
    }
}
