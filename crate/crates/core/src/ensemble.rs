//! Seeded ensembles of modulated Gaussians used as Schwartz-type test
//! functions for operator estimates.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::spectral::{Field, Grid};

/// Parameter ranges of the ensemble members
/// `exp(-|x - c|² / 2w²) cos(k·x + φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    /// Centers are drawn per axis from `[center_lo, center_hi]`.
    pub center_lo: f64,
    pub center_hi: f64,
    pub width_lo: f64,
    pub width_hi: f64,
    /// Modulation wavevector components are drawn from `[-k_max, k_max]`.
    pub k_max: f64,
}

impl EnsembleSpec {
    /// 100 members centered within ±5 with widths in [1, 2] and |k| <= 2.
    pub fn standard() -> EnsembleSpec {
        EnsembleSpec {
            count: 100,
            center_lo: -5.0,
            center_hi: 5.0,
            width_lo: 1.0,
            width_hi: 2.0,
            k_max: 2.0,
        }
    }
}

/// Draw the ensemble deterministically from `seed`.
pub fn gaussian_ensemble(grid: &Arc<Grid>, spec: &EnsembleSpec, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    (0..spec.count)
        .map(|_| {
            let mut c = [0.0; 2];
            let mut k = [0.0; 2];
            for a in 0..dim {
                c[a] = rng.gen_range(spec.center_lo..=spec.center_hi);
                k[a] = rng.gen_range(-spec.k_max..=spec.k_max);
            }
            let w = rng.gen_range(spec.width_lo..=spec.width_hi);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            Field::from_fn(grid.clone(), move |x| {
                let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                (-r2 / (2.0 * w * w)).exp() * (k[0] * x[0] + k[1] * x[1] + phase).cos()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn same_seed_same_ensemble() {
        let g = make_grid(1, 20.0, 64).unwrap();
        let spec = EnsembleSpec { count: 5, ..EnsembleSpec::standard() };
        let a = gaussian_ensemble(&g, &spec, 7);
        let b = gaussian_ensemble(&g, &spec, 7);
        let c = gaussian_ensemble(&g, &spec, 8);
        assert!(a.iter().zip(&b).all(|(x, y)| x.values() == y.values()));
        assert!(a.iter().zip(&c).any(|(x, y)| x.values() != y.values()));
    }
}
