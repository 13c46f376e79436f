//! Pseudo-spectral time integration of KdV and ZK, ground states and
//! conserved quantities.
//!
//! Both equations are written as `u_t = L u + N(u)` in Fourier space with
//! `L = iω(ξ)` (see [`Model::linear_rates`]) and
//! `N(u) = -½ ∂x₁(u²)`, the product optionally dealiased with the 2/3 rule.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::linear_fit;
use crate::spectral::{apply_derivative, apply_real_multiplier, Field, Grid, Model, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    Etdrk4,
    ImexCn,
}

impl Integrator {
    /// Upper bound on `dt · max|ω|`.
    ///
    /// ETDRK4 treats the linear part exactly, so its bound only guards
    /// against absurd configurations. Crank–Nicolson is stable for any step
    /// but its phase error is O(1) once a step spans a full period of the
    /// fastest mode.
    pub fn stability_limit(self) -> f64 {
        match self {
            Integrator::Etdrk4 => 1e5,
            Integrator::ImexCn => 2.0 * std::f64::consts::PI,
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Integrator> {
        match s.to_ascii_lowercase().as_str() {
            "etdrk4" => Ok(Integrator::Etdrk4),
            "imex-cn" | "imex_cn" | "cnab2" => Ok(Integrator::ImexCn),
            other => Err(invalid(format!("unknown integrator '{other}'"))),
        }
    }
}

impl std::str::FromStr for Dealias {
    type Err = Error;
    fn from_str(s: &str) -> Result<Dealias> {
        match s.to_ascii_lowercase().as_str() {
            "two-thirds" | "2/3" => Ok(Dealias::TwoThirds),
            "none" | "off" => Ok(Dealias::None),
            other => Err(invalid(format!("unknown dealiasing '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub model: Model,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: Dealias,
    pub integrator: Integrator,
    pub snapshot_stride: usize,
}

impl SolverConfig {
    pub fn new(model: Model, dt: f64, t_end: f64) -> SolverConfig {
        SolverConfig {
            model,
            dt,
            t_end,
            dealias: Dealias::TwoThirds,
            integrator: Integrator::Etdrk4,
            snapshot_stride: 1,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// All violations against `grid`, empty when the configuration is usable.
    pub fn violations(&self, grid: &Grid) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            v.push(format!("t_end = {} must be nonnegative", self.t_end));
        }
        if self.snapshot_stride == 0 {
            v.push("snapshot stride must be at least 1".into());
        }
        if self.dt > 0.0 && self.t_end >= 0.0 {
            let n = (self.t_end / self.dt).round();
            if (n * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
                v.push(format!("t_end = {} is not a multiple of dt = {}", self.t_end, self.dt));
            }
        }
        if grid.dim() != self.model.dim() {
            v.push(format!("{:?} needs a {}D grid, got {}D", self.model, self.model.dim(), grid.dim()));
        } else {
            let wmax = self.model.linear_rates(grid).iter().fold(0.0f64, |m, w| m.max(w.abs()));
            let limit = self.integrator.stability_limit();
            if self.dt * wmax > limit {
                v.push(format!(
                    "dt * max|omega| = {:.3e} exceeds the {:?} limit {limit:.3e}",
                    self.dt * wmax,
                    self.integrator
                ));
            }
        }
        v
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let v = self.violations(grid);
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid(v.join("; ")))
        }
    }
}

/// `(mass, l2, hamiltonian)` with `H = ∫ ½|∇u|² - ⅙u³`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    pub mass: f64,
    pub l2: f64,
    pub hamiltonian: f64,
}

pub fn conserved(u: &Field) -> Conserved {
    let g = u.grid();
    let mut grad_sq = 0.0;
    for axis in 0..g.dim() {
        let mut o = [0u32; 2];
        o[axis] = 1;
        let d = apply_derivative(u, MultiIndex(o)).expect("first derivative is always admissible");
        grad_sq += d.norm_sq();
    }
    let cubic = u.values().iter().map(|v| v * v * v).sum::<f64>() * g.cell_volume();
    Conserved { mass: u.integral(), l2: u.norm_sq(), hamiltonian: 0.5 * grad_sq - cubic / 6.0 }
}

/// Snapshots of one run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
    pub conserved: Vec<Conserved>,
    /// Last valid time when a non-finite value stopped the run.
    pub aborted_at: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &Field {
        self.snapshots.last().expect("trajectory holds the initial state")
    }

    /// Largest relative change of `l2` against the initial value.
    pub fn l2_drift(&self) -> f64 {
        let l0 = self.conserved[0].l2;
        self.conserved.iter().map(|c| ((c.l2 - l0) / l0).abs()).fold(0.0, f64::max)
    }

    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.conserved[0].hamiltonian;
        let scale = h0.abs().max(1e-300);
        self.conserved.iter().map(|c| ((c.hamiltonian - h0) / scale).abs()).fold(0.0, f64::max)
    }

    /// Snapshots at times within `[t0, t1]`.
    pub fn window(&self, t0: f64, t1: f64) -> impl Iterator<Item = (f64, &Field)> {
        self.times
            .iter()
            .copied()
            .zip(&self.snapshots)
            .filter(move |(t, _)| *t >= t0 - 1e-12 && *t <= t1 + 1e-12)
    }
}

/// Number of contour points for the ETDRK4 coefficients.
const CONTOUR_POINTS: usize = 64;

struct EtdCoefficients {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

impl EtdCoefficients {
    fn new(rates: &[f64], dt: f64) -> EtdCoefficients {
        let roots: Vec<Complex64> = (0..CONTOUR_POINTS)
            .map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * (j as f64 + 0.5) / CONTOUR_POINTS as f64 * 2.0))
            .collect();
        let m = CONTOUR_POINTS as f64;
        let n = rates.len();
        let mut c = EtdCoefficients {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            f1: Vec::with_capacity(n),
            f2: Vec::with_capacity(n),
            f3: Vec::with_capacity(n),
        };
        for &w in rates {
            let l = Complex64::new(0.0, w * dt);
            c.e.push(l.exp());
            c.e2.push((l * 0.5).exp());
            let (mut q, mut f1, mut f2, mut f3) = (Complex64::default(), Complex64::default(), Complex64::default(), Complex64::default());
            for r in &roots {
                let z = l + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z * 0.5).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            c.q.push(dt * q / m);
            c.f1.push(dt * f1 / m);
            c.f2.push(dt * f2 / m);
            c.f3.push(dt * f3 / m);
        }
        c
    }
}

/// Integrator bound to a grid and configuration.
pub struct Solver {
    grid: Arc<Grid>,
    config: SolverConfig,
    /// `-½ i ξ₁` with the Nyquist mode and, when dealiasing, the top third removed.
    nonlinear_symbol: Vec<Complex64>,
    /// Modes kept in `u` before squaring; `None` without dealiasing.
    input_mask: Option<Vec<bool>>,
    rates: Vec<f64>,
    etd: Option<EtdCoefficients>,
}

impl Solver {
    pub fn new(grid: &Arc<Grid>, config: SolverConfig) -> Result<Solver> {
        config.validate(grid)?;
        let rates = config.model.linear_rates(grid);
        let nonlinear_symbol = (0..grid.len())
            .map(|idx| {
                if grid.is_nyquist(idx, 0) || (config.dealias == Dealias::TwoThirds && !in_two_thirds(grid, idx)) {
                    Complex64::default()
                } else {
                    Complex64::new(0.0, -0.5 * grid.wavevector(idx)[0])
                }
            })
            .collect();
        let etd = match config.integrator {
            Integrator::Etdrk4 => Some(EtdCoefficients::new(&rates, config.dt)),
            Integrator::ImexCn => None,
        };
        let input_mask = (config.dealias == Dealias::TwoThirds)
            .then(|| (0..grid.len()).map(|idx| in_two_thirds(grid, idx)).collect());
        Ok(Solver { grid: grid.clone(), config, nonlinear_symbol, input_mask, rates, etd })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `N̂(v)` for a spectrum `v`.
    pub fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut u = v.to_vec();
        if let Some(mask) = &self.input_mask {
            for (c, keep) in u.iter_mut().zip(mask) {
                if !keep {
                    *c = Complex64::default();
                }
            }
        }
        self.grid.fft_inverse(&mut u);
        for c in u.iter_mut() {
            *c = Complex64::new(c.re * c.re, 0.0);
        }
        self.grid.fft_forward(&mut u);
        for (c, s) in u.iter_mut().zip(&self.nonlinear_symbol) {
            *c *= s;
        }
        u
    }

    /// The nonlinearity `-½∂x₁(u²)` as a field, with this solver's dealiasing.
    pub fn nonlinear_field(&self, u: &Field) -> Field {
        Field::from_spectrum(self.grid.clone(), self.nonlinear(u.spectrum()))
    }

    fn etdrk4_step(&self, v: &[Complex64]) -> Vec<Complex64> {
        let c = self.etd.as_ref().expect("ETDRK4 coefficients");
        let nv = self.nonlinear(v);
        let a: Vec<Complex64> = (0..v.len()).map(|k| c.e2[k] * v[k] + c.q[k] * nv[k]).collect();
        let na = self.nonlinear(&a);
        let b: Vec<Complex64> = (0..v.len()).map(|k| c.e2[k] * v[k] + c.q[k] * na[k]).collect();
        let nb = self.nonlinear(&b);
        let cc: Vec<Complex64> =
            (0..v.len()).map(|k| c.e2[k] * a[k] + c.q[k] * (2.0 * nb[k] - nv[k])).collect();
        let nc = self.nonlinear(&cc);
        (0..v.len())
            .map(|k| c.e[k] * v[k] + c.f1[k] * nv[k] + 2.0 * c.f2[k] * (na[k] + nb[k]) + c.f3[k] * nc[k])
            .collect()
    }

    /// Crank–Nicolson on the linear part, Adams–Bashforth on `N`; the first
    /// step (no history) is forward Euler on `N`.
    fn cnab2_step(&self, v: &[Complex64], prev_n: Option<&[Complex64]>) -> (Vec<Complex64>, Vec<Complex64>) {
        let dt = self.config.dt;
        let nv = self.nonlinear(v);
        let next = (0..v.len())
            .map(|k| {
                let l = Complex64::new(0.0, self.rates[k] * dt * 0.5);
                let explicit = match prev_n {
                    Some(p) => 1.5 * nv[k] - 0.5 * p[k],
                    None => nv[k],
                };
                ((1.0 + l) * v[k] + dt * explicit) / (1.0 - l)
            })
            .collect();
        (next, nv)
    }

    /// Advance one step from `u`. Multistep history is not carried, so
    /// IMEX-CN takes its start-up step here.
    pub fn step(&self, u: &Field) -> Result<Field> {
        let v = match self.config.integrator {
            Integrator::Etdrk4 => self.etdrk4_step(u.spectrum()),
            Integrator::ImexCn => self.cnab2_step(u.spectrum(), None).0,
        };
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite { t: self.config.dt });
        }
        Ok(Field::from_spectrum(self.grid.clone(), v))
    }

    /// Integrate from `u0` at time 0 to `t_end`, recording every
    /// `snapshot_stride` steps and the final state.
    pub fn run(&self, u0: &Field) -> Result<Trajectory> {
        if **u0.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let steps = self.config.steps();
        let stride = self.config.snapshot_stride;
        let mut traj = Trajectory {
            config: self.config,
            times: vec![0.0],
            snapshots: vec![u0.clone()],
            conserved: vec![conserved(u0)],
            aborted_at: None,
        };
        let mut v = u0.spectrum().to_vec();
        let mut history: Option<Vec<Complex64>> = None;
        for n in 1..=steps {
            let next = match self.config.integrator {
                Integrator::Etdrk4 => self.etdrk4_step(&v),
                Integrator::ImexCn => {
                    let (next, nv) = self.cnab2_step(&v, history.as_deref());
                    history = Some(nv);
                    next
                }
            };
            if next.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                traj.aborted_at = Some((n - 1) as f64 * self.config.dt);
                return Ok(traj);
            }
            v = next;
            if n % stride == 0 || n == steps {
                let u = Field::from_spectrum(self.grid.clone(), v.clone());
                traj.times.push(n as f64 * self.config.dt);
                traj.conserved.push(conserved(&u));
                traj.snapshots.push(u);
            }
        }
        Ok(traj)
    }
}

fn in_two_thirds(grid: &Grid, idx: usize) -> bool {
    let n1 = grid.points(1);
    let ks = [idx / n1, idx % n1];
    (0..grid.dim()).all(|a| {
        let n = grid.points(a);
        let k = if ks[a] <= n / 2 { ks[a] } else { n - ks[a] };
        3 * k <= n
    })
}

// ---------------------------------------------------------------------------
// Ground states

/// Positive solution of `ΔQ - Q + ½Q² = 0` scaled to speed `c`.
#[derive(Clone, Debug)]
pub struct GroundState {
    pub q: Field,
    pub c: f64,
    /// `‖ΔQ - Q + ½Q²‖ / ‖Q‖` of the unit-speed profile.
    pub residual: f64,
    /// Fitted exponential decay rate of the unit-speed profile.
    pub delta: f64,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

pub const GROUND_STATE_MAX_ITERATIONS: usize = 500;

/// `‖ΔQ - cQ + ½Q²‖ / ‖Q‖`.
pub fn ground_state_residual(q: &Field, c: f64) -> f64 {
    let lap = apply_real_multiplier(q, |_, xi| Complex64::new(-(xi[0] * xi[0] + xi[1] * xi[1]), 0.0));
    let r: Vec<f64> = lap
        .values()
        .iter()
        .zip(q.values())
        .map(|(l, v)| l - c * v + 0.5 * v * v)
        .collect();
    Field::new(q.grid().clone(), r).expect("same grid").norm() / q.norm()
}

/// Petviashvili iteration for `(c - Δ)u = ½u²`, starting from `guess`.
pub fn petviashvili(guess: &Field, c: f64, max_iterations: usize) -> Result<(Field, usize, Vec<f64>)> {
    if c <= 0.0 {
        return Err(invalid(format!("wave speed c = {c} must be positive")));
    }
    let g = guess.grid().clone();
    let symbol: Vec<f64> = (0..g.len())
        .map(|i| {
            let xi = g.wavevector(i);
            c + xi[0] * xi[0] + xi[1] * xi[1]
        })
        .collect();
    let mut u = guess.clone();
    let mut history = Vec::new();
    for it in 1..=max_iterations {
        let s = stabilizing_factor(&u, &symbol);
        u = petviashvili_map(&u, &symbol);
        let res = ground_state_residual(&u, c);
        history.push(res);
        if !res.is_finite() {
            return Err(Error::NonFinite { t: it as f64 });
        }
        if (s - 1.0).abs() < 1e-12 && res < 1e-9 {
            // keep iterating while the residual still contracts
            let mut best = (u, res);
            for _ in 0..50 {
                let next = petviashvili_map(&best.0, &symbol);
                let r = ground_state_residual(&next, c);
                if r.is_nan() || r >= 0.9 * best.1 {
                    break;
                }
                history.push(r);
                best = (next, r);
            }
            return Ok((best.0, history.len(), history));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iterations,
        last_residual: *history.last().unwrap_or(&f64::NAN),
        residuals: history,
    })
}

/// `s = ⟨(c-Δ)u, u⟩ / ⟨½u², u⟩`, computed in spectral form.
fn stabilizing_factor(u: &Field, symbol: &[f64]) -> f64 {
    let us = u.spectrum();
    let half_sq = u.map(|v| 0.5 * v * v);
    let lin: f64 = us.iter().zip(symbol).map(|(a, s)| s * a.norm_sqr()).sum();
    let non: f64 = us.iter().zip(half_sq.spectrum()).map(|(a, b)| (a.conj() * b).re).sum();
    lin / non
}

/// `u ↦ s² (c-Δ)^{-1}(½u²)`.
fn petviashvili_map(u: &Field, symbol: &[f64]) -> Field {
    let s = stabilizing_factor(u, symbol);
    let half_sq = u.map(|v| 0.5 * v * v);
    let next = half_sq.spectrum().iter().zip(symbol).map(|(b, m)| b * (s * s / m)).collect();
    Field::from_spectrum(u.grid().clone(), next)
}

/// Ground state centered at the origin, computed at unit speed and mapped to
/// speed `c` through `Q_c(x) = c Q(√c x)`.
pub fn ground_state(grid: &Arc<Grid>, c: f64) -> Result<GroundState> {
    if c <= 0.0 {
        return Err(invalid(format!("wave speed c = {c} must be positive")));
    }
    let half = (0..grid.dim()).map(|a| 0.5 * grid.box_length(a)).fold(f64::INFINITY, f64::min);
    if (-(c.sqrt()).min(1.0) * half).exp() >= 1e-12 {
        return Err(invalid(format!(
            "box half-width {half} too small: need exp(-min(1, sqrt c) L/2) < 1e-12"
        )));
    }
    let guess = Field::from_fn(grid.clone(), |x| 4.0 * (-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp());
    let (q, iterations, residual_history) = petviashvili(&guess, 1.0, GROUND_STATE_MAX_ITERATIONS)?;
    let residual = ground_state_residual(&q, 1.0);
    let delta = fit_decay_rate(&q, 5.0, 15.0);
    let q = if c == 1.0 { q } else { q.resample_scaled(c.sqrt()).scale(c) };
    Ok(GroundState { q, c, residual, delta, iterations, residual_history })
}

/// Minus the slope of `log|u|` against `x₁` along the positive axis, over
/// `lo <= x₁ <= hi`.
pub fn fit_decay_rate(u: &Field, lo: f64, hi: f64) -> f64 {
    let g = u.grid();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for i in 0..g.len() {
        let p = g.point(i);
        if p[1] == 0.0 && p[0] >= lo && p[0] <= hi && u.values()[i] > 0.0 {
            xs.push(p[0]);
            ys.push(u.values()[i].ln());
        }
    }
    let (slope, _) = linear_fit(&xs, &ys);
    -slope
}

impl GroundState {
    /// Most negative sample relative to the maximum (0 when positive).
    pub fn negativity(&self) -> f64 {
        let min = self.q.values().iter().fold(f64::INFINITY, |m, v| m.min(*v));
        (-min).max(0.0) / self.q.max_abs()
    }

    /// Largest deviation from radial symmetry, comparing `Q(r, 0)` with
    /// `Q(r cos θ, r sin θ)` for a few angles, relative to `max Q`.
    pub fn radial_asymmetry(&self) -> f64 {
        let g = self.q.grid();
        if g.dim() == 1 {
            let n = g.points(0);
            let v = self.q.values();
            return (1..n).map(|i| (v[i] - v[n - i]).abs()).fold(0.0, f64::max) / self.q.max_abs();
        }
        let mut worst: f64 = 0.0;
        for k in 1..=12 {
            let r = 0.5 * k as f64;
            let base = self.q.interpolate(&[r, 0.0]);
            for th in [0.3, std::f64::consts::FRAC_PI_4, 1.3, 2.5, 4.0] {
                let v = self.q.interpolate(&[r * th.cos(), r * th.sin()]);
                worst = worst.max((v - base).abs());
            }
        }
        worst / self.q.max_abs()
    }
}

// ---------------------------------------------------------------------------
// Travelling waves and initial data

/// `3c sech²(½√c (x - x₀ - ct))`, the KdV soliton.
pub fn kdv_soliton(grid: &Arc<Grid>, c: f64, x0: f64, t: f64) -> Field {
    Field::from_fn(grid.clone(), |x| {
        let z = 0.5 * c.sqrt() * (x[0] - x0 - c * t);
        3.0 * c / z.cosh().powi(2)
    })
}

/// `u(x - shift)` by a spectral phase.
pub fn translate(u: &Field, shift: [f64; 2]) -> Field {
    apply_real_multiplier(u, |_, xi| Complex64::from_polar(1.0, -(xi[0] * shift[0] + xi[1] * shift[1])))
}

/// Tail of one-sided initial data on `σ·x > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Tail {
    /// `⟨s/a⟩^{-ρ}`.
    Poly { rho: f64 },
    /// `e^{-b(√(a²+s²) - a)}`, which is `e^{-b s}` up to a constant for large `s`.
    Exp { b: f64 },
}

/// Data `A · P(σ·x) · G(σ⊥·x)` with a decaying right tail on `s > 0`, a
/// slowly decaying left part and a Gaussian transverse profile `G`.
///
/// Every ingredient is analytic with a spectrum decaying at least like
/// `e^{-a|ξ|}`. Fast dispersive modes move left at speed `3ξ₁²`, so a heavy
/// spectral tail would wrap through the seam within a fraction of a time unit.
/// The halves are joined by an erf blend of width `blend` and both ends are
/// switched off by `exp(-(s/cut)^4)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSidedData {
    pub amplitude: f64,
    pub sigma: [f64; 2],
    pub tail: Tail,
    /// Exponent of the left part `⟨s/a⟩^{-left_power}`.
    pub left_power: f64,
    /// The length `a`.
    pub scale: f64,
    pub blend: f64,
    pub cut_right: f64,
    pub cut_left: f64,
    pub transverse_width: f64,
    /// Wavenumber `k₀` of an optional `cos(k₀ s)` carrier; zero for none.
    #[serde(default)]
    pub carrier: f64,
}

impl OneSidedData {
    pub fn profile(&self, s: f64) -> f64 {
        let a = self.scale;
        let right = match self.tail {
            Tail::Poly { rho } => (1.0 + (s / a).powi(2)).powf(-0.5 * rho),
            Tail::Exp { b } => (-b * ((a * a + s * s).sqrt() - a)).exp(),
        } * (-(s / self.cut_right).powi(4)).exp();
        let left = (1.0 + (s / a).powi(2)).powf(-0.5 * self.left_power) * (-(s / self.cut_left).powi(4)).exp();
        let w = 0.5 * (1.0 + libm::erf(s / self.blend));
        self.amplitude * (w * right + (1.0 - w) * left) * (self.carrier * s).cos()
    }

    pub fn sample(&self, grid: &Arc<Grid>) -> Field {
        let n = (self.sigma[0].hypot(self.sigma[1])).max(1e-300);
        let (s0, s1) = (self.sigma[0] / n, self.sigma[1] / n);
        let two_d = grid.dim() == 2;
        Field::from_fn(grid.clone(), |x| {
            let s = s0 * x[0] + s1 * x[1];
            let transverse = if two_d {
                let p = -s1 * x[0] + s0 * x[1];
                (-p * p / (2.0 * self.transverse_width * self.transverse_width)).exp()
            } else {
                1.0
            };
            self.profile(s) * transverse
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;

    #[test]
    fn zero_field_stays_zero() {
        let g = make_grid(1, 50.0, 128).unwrap();
        let cfg = SolverConfig::new(Model::Kdv, 0.01, 0.1);
        for integrator in [Integrator::Etdrk4, Integrator::ImexCn] {
            let s = Solver::new(&g, SolverConfig { integrator, ..cfg }).unwrap();
            let traj = s.run(&Field::zeros(g.clone())).unwrap();
            assert_eq!(traj.last().max_abs(), 0.0);
        }
    }

    #[test]
    fn config_lists_every_violation() {
        let g = make_grid(2, 50.0, 64).unwrap();
        let cfg = SolverConfig { snapshot_stride: 0, ..SolverConfig::new(Model::Kdv, -1.0, -2.0) };
        assert_eq!(cfg.violations(&g).len(), 4);
    }

    #[test]
    fn imex_rejects_large_phase_steps() {
        let g = make_grid(1, 50.0, 512).unwrap();
        let cfg = SolverConfig { integrator: Integrator::ImexCn, ..SolverConfig::new(Model::Kdv, 0.01, 1.0) };
        assert!(cfg.validate(&g).is_err());
        assert!(SolverConfig::new(Model::Kdv, 0.01, 1.0).validate(&g).is_ok());
    }

    #[test]
    fn linear_etd_matches_exact_flow() {
        // amplitude tiny so the nonlinearity is negligible at this tolerance
        let g = make_grid(1, 40.0, 128).unwrap();
        let u0 = Field::from_fn(g.clone(), |x| 1e-12 * (-x[0] * x[0]).exp());
        let traj = Solver::new(&g, SolverConfig::new(Model::Kdv, 0.05, 1.0)).unwrap().run(&u0).unwrap();
        let exact = crate::spectral::linear_propagate(&u0, 1.0, Model::Kdv).unwrap();
        assert!(traj.last().sub(&exact).unwrap().max_abs() < 1e-22);
    }

    #[test]
    fn parity_of_conserved_quantities() {
        let g = make_grid(1, 40.0, 128).unwrap();
        let u = kdv_soliton(&g, 1.0, 0.0, 0.0);
        let a = conserved(&u);
        let b = conserved(&u.scale(-1.0));
        assert!((a.mass + b.mass).abs() < 1e-12);
        assert!((a.l2 - b.l2).abs() < 1e-12);
        let grad = 0.5 * apply_derivative(&u, MultiIndex([1, 0])).unwrap().norm_sq();
        assert!(((a.hamiltonian - grad) + (b.hamiltonian - grad)).abs() < 1e-12);
        assert_eq!(conserved(&Field::zeros(g)), Conserved::default());
    }

    #[test]
    fn one_dimensional_ground_state_is_sech_squared() {
        let g = make_grid(1, 64.0, 256).unwrap();
        let gs = ground_state(&g, 1.0).unwrap();
        let exact = kdv_soliton(&g, 1.0, 0.0, 0.0);
        assert!(gs.q.sub(&exact).unwrap().max_abs() < 1e-9);
        assert!((gs.delta - 1.0).abs() < 0.01);
    }

    #[test]
    fn two_thirds_mask() {
        let g = make_grid(1, 10.0, 12).unwrap();
        let kept: Vec<bool> = (0..12).map(|i| in_two_thirds(&g, i)).collect();
        assert_eq!(kept, [true, true, true, true, true, false, false, false, true, true, true, true]);
    }
}
