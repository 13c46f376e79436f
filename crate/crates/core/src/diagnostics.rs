//! Weighted norms over moving half-spaces and strips, smoothing scans, the
//! cone condition and the weighted energy identity.
//!
//! Regions move with the frame coordinate `s = σ·x + νt + κ`. The half-space
//! at time `t` is `{s > ε}`, i.e. `{σ·x > ε - κ - νt}`; a strip is
//! `{lo < s < hi}`. The smoothed half-space norm replaces the indicator by
//! `χ²_{ε,τ}(s)`.
//!
//! Everything here consumes snapshots and never touches the integrator,
//! except for the energy identity, which needs the solver's dealiased
//! nonlinearity.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::evolve::{Solver, Trajectory};
use crate::jet::Jet;
use crate::quadrature::{linear_fit, trapezoid};
use crate::spectral::{
    apply_bessel, apply_derivative, linear_propagate, Field, Grid, Model, MultiIndex, DERIVATIVE_CAP,
    SEAM_FRACTION,
};
use crate::weights::{CutoffFamily, PolyWeight};

// ---------------------------------------------------------------------------
// Cone condition

/// `M` with `3σ₁` in the corner, `σ_j` couplings in the first row and
/// column and `σ₁` on the rest of the diagonal.
pub fn cone_matrix(sigma: &[f64]) -> DMatrix<f64> {
    let n = sigma.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    m[(0, 0)] = 3.0 * sigma[0];
    for j in 1..n {
        m[(0, j)] = sigma[j];
        m[(j, 0)] = sigma[j];
        m[(j, j)] = sigma[0];
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub sigma: Vec<f64>,
    /// `σ₁ > 0` and `√3 σ₁ > |σ⊥|`.
    pub algebraic: bool,
    /// Smallest eigenvalue of `M`, computed numerically.
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

impl ConeReport {
    pub fn holds(&self) -> bool {
        self.positive_definite
    }

    pub fn consistent(&self) -> bool {
        self.algebraic == self.positive_definite
    }
}

pub fn cone_check(sigma: &[f64]) -> Result<ConeReport> {
    if sigma.is_empty() || sigma.iter().all(|s| *s == 0.0) {
        return Err(invalid("cone vector must be nonzero"));
    }
    let perp = sigma[1..].iter().map(|s| s * s).sum::<f64>().sqrt();
    let algebraic = sigma[0] > 0.0 && 3f64.sqrt() * sigma[0] > perp;
    let eig = SymmetricEigen::new(cone_matrix(sigma));
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConeReport { sigma: sigma.to_vec(), algebraic, min_eigenvalue, positive_definite: min_eigenvalue > 0.0 })
}

// ---------------------------------------------------------------------------
// Regions and weights

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionKind {
    /// `{s > ε}`.
    HalfSpace,
    /// `{lo < s < hi}`.
    Strip { lo: f64, hi: f64 },
    /// The whole box.
    Everywhere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MovingRegion {
    pub sigma: [f64; 2],
    pub nu: f64,
    pub kappa: f64,
    /// `ε` is the half-space threshold; `τ` sets the smoothing band.
    pub cutoff: CutoffFamily,
    pub kind: RegionKind,
}

impl MovingRegion {
    pub fn half_space(sigma: [f64; 2], nu: f64, kappa: f64, cutoff: CutoffFamily) -> MovingRegion {
        MovingRegion { sigma, nu, kappa, cutoff, kind: RegionKind::HalfSpace }
    }

    pub fn strip(sigma: [f64; 2], nu: f64, kappa: f64, cutoff: CutoffFamily, lo: f64, hi: f64) -> Result<MovingRegion> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(invalid(format!("strip bounds must satisfy lo < hi, got {lo} >= {hi}")));
        }
        Ok(MovingRegion { sigma, nu, kappa, cutoff, kind: RegionKind::Strip { lo, hi } })
    }

    pub fn everywhere(cutoff: CutoffFamily) -> MovingRegion {
        MovingRegion { sigma: [1.0, 0.0], nu: 0.0, kappa: 0.0, cutoff, kind: RegionKind::Everywhere }
    }

    /// `s = σ·x + νt + κ`.
    pub fn frame(&self, x: &[f64; 2], t: f64) -> f64 {
        self.sigma[0] * x[0] + self.sigma[1] * x[1] + self.nu * t + self.kappa
    }

    pub fn contains(&self, x: &[f64; 2], t: f64) -> bool {
        let s = self.frame(x, t);
        match self.kind {
            RegionKind::HalfSpace => s > self.cutoff.eps,
            RegionKind::Strip { lo, hi } => lo < s && s < hi,
            RegionKind::Everywhere => true,
        }
    }

    /// Boundaries of the region at time `t` as values of `σ·x`.
    pub fn boundaries(&self, t: f64) -> Vec<f64> {
        let shift = self.nu * t + self.kappa;
        match self.kind {
            RegionKind::HalfSpace => vec![self.cutoff.eps - shift],
            RegionKind::Strip { lo, hi } => vec![lo - shift, hi - shift],
            RegionKind::Everywhere => vec![],
        }
    }

    pub fn label(&self) -> String {
        match self.kind {
            RegionKind::HalfSpace => format!("half-space(nu={},kappa={},eps={})", self.nu, self.kappa, self.cutoff.eps),
            RegionKind::Strip { lo, hi } => format!("strip(nu={},kappa={},{lo}..{hi})", self.nu, self.kappa),
            RegionKind::Everywhere => "box".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightKind {
    /// `⟨y⟩^r`.
    Poly { r: f64 },
    /// `e^{b y}`.
    Exp { b: f64 },
}

impl WeightKind {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            WeightKind::Poly { r } => (1.0 + y * y).powf(0.5 * r),
            WeightKind::Exp { b } => (b * y).exp(),
        }
    }
}

/// Relative `L²` mass allowed inside the seam band.
pub const SEAM_TOLERANCE: f64 = 1e-8;

/// Fraction of `‖u‖²` carried by the seam band.
pub fn seam_mass(u: &Field) -> f64 {
    let band = u.grid().seam_band();
    let total = u.norm_sq() / u.grid().cell_volume();
    if total == 0.0 {
        return 0.0;
    }
    let inside: f64 = u.values().iter().zip(&band).filter(|(_, b)| **b).map(|(v, _)| v * v).sum();
    inside / total
}

/// Fail when `u` reaches the seam band or a region boundary leaves the
/// seam-safe window.
pub fn seam_check(u: &Field, region: &MovingRegion, t: f64) -> Result<()> {
    let m = seam_mass(u);
    if m > SEAM_TOLERANCE {
        return Err(Error::Seam(format!("relative mass {m:.3e} in the seam band at t = {t}")));
    }
    let g = u.grid();
    let norm = region.sigma[0].hypot(region.sigma[1]);
    let half = (0.5 - SEAM_FRACTION) * g.box_length(0);
    for b in region.boundaries(t) {
        if (b / norm).abs() > half {
            return Err(Error::Seam(format!("region boundary {b} outside the seam-safe window at t = {t}")));
        }
    }
    Ok(())
}

/// Grid points a region may integrate over: everything for the whole box,
/// otherwise the seam-safe window. A half-space on the box is clipped there.
fn window_mask(g: &Grid, region: &MovingRegion) -> Vec<bool> {
    match region.kind {
        RegionKind::Everywhere => vec![true; g.len()],
        _ => g.seam_band().into_iter().map(|b| !b).collect(),
    }
}

/// Sharp and smoothed weighted half-space norms of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceNorm {
    pub t: f64,
    /// `∫_region (w(σ·x) u)²`.
    pub sharp: f64,
    /// `∫ χ²_{ε,τ}(s) (w(σ·x) u)²`.
    pub smoothed: f64,
    /// `∫_{ε<s<τ} (w(σ·x) u)²`.
    pub band_mass: f64,
    /// `∫_region (w(σ·x + νt) u)²`.
    pub running: f64,
}

pub fn weighted_halfspace_norm(u: &Field, region: &MovingRegion, t: f64, weight: WeightKind) -> Result<HalfspaceNorm> {
    seam_check(u, region, t)?;
    Ok(halfspace_norm_unchecked(u, region, t, weight))
}

fn halfspace_norm_unchecked(u: &Field, region: &MovingRegion, t: f64, weight: WeightKind) -> HalfspaceNorm {
    let g = u.grid();
    let mask = window_mask(g, region);
    let (mut sharp, mut smoothed, mut band, mut running) = (0.0, 0.0, 0.0, 0.0);
    for (i, v) in u.values().iter().enumerate() {
        if !mask[i] {
            continue;
        }
        let x = g.point(i);
        let y = region.sigma[0] * x[0] + region.sigma[1] * x[1];
        let w2 = weight.eval(y).powi(2) * v * v;
        let s = region.frame(&x, t);
        if region.contains(&x, t) {
            sharp += w2;
            running += weight.eval(y + region.nu * t).powi(2) * v * v;
        }
        match region.kind {
            RegionKind::Everywhere => smoothed += w2,
            _ => {
                smoothed += region.cutoff.chi(s).powi(2) * w2;
                if s > region.cutoff.eps && s < region.cutoff.tau {
                    band += w2;
                }
            }
        }
    }
    let dv = g.cell_volume();
    HalfspaceNorm { t, sharp: sharp * dv, smoothed: smoothed * dv, band_mass: band * dv, running: running * dv }
}

// ---------------------------------------------------------------------------
// Verdicts

/// Factor by which a bounded quantity may exceed its first value.
pub const BOUNDED_FACTOR: f64 = 5.0;
/// Relative increase over the final third that counts as growth.
pub const GROWTH_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub first: f64,
    pub max: f64,
    pub ratio: f64,
    pub final_third_growth: bool,
    pub bounded: bool,
}

/// A series "remains bounded" when its max is at most 5× its first value and
/// the final third is not a nondecreasing run gaining more than 5%.
pub fn boundedness(values: &[f64]) -> Boundedness {
    let first = values.first().copied().unwrap_or(0.0);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = if first > 0.0 { max / first } else if max > 0.0 { f64::INFINITY } else { 1.0 };
    let tail = &values[values.len() - values.len().div_ceil(3).max(1).min(values.len())..];
    let nondecreasing = tail.windows(2).all(|w| w[1] >= w[0]);
    let gain = match (tail.first(), tail.last()) {
        (Some(a), Some(b)) if *a > 0.0 => b / a - 1.0,
        _ => 0.0,
    };
    let final_third_growth = tail.len() >= 2 && nondecreasing && gain > GROWTH_TOLERANCE;
    let finite = values.iter().all(|v| v.is_finite());
    Boundedness {
        first,
        max,
        ratio,
        final_third_growth,
        bounded: finite && ratio <= BOUNDED_FACTOR && !final_third_growth,
    }
}

/// Maximum of a per-step series, coarsened to a power-of-two stride and
/// refined until halving the stride changes the maximum by less than 1%.
/// Returns the maximum and the stride at which it settled.
pub fn refined_sup(values: &[f64]) -> (f64, usize) {
    let sup_at = |k: usize| values.iter().step_by(k).chain(values.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut stride = 1usize;
    while stride * 8 <= values.len() {
        stride *= 2;
    }
    let mut current = sup_at(stride);
    while stride > 1 {
        let finer = sup_at(stride / 2);
        stride /= 2;
        let settled = (finer - current).abs() <= 0.01 * current.abs();
        current = finer;
        if settled {
            break;
        }
    }
    (current, stride)
}

// ---------------------------------------------------------------------------
// Scans over trajectories

/// `r_s = max{(1 - s/⌊2r⌋) r, r - ⌈s⌉/2}` for `0 <= s <= ⌊2r⌋`.
pub fn r_s(r: f64, s: f64) -> Result<f64> {
    let k = (2.0 * r).floor();
    if k < 1.0 {
        return Err(invalid(format!("r = {r} below 1/2")));
    }
    if !(0.0..=k).contains(&s) {
        return Err(invalid(format!("s = {s} outside [0, {k}]")));
    }
    Ok(((1.0 - s / k) * r).max(r - 0.5 * s.ceil()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sup: f64,
    pub verdict: Boundedness,
}

impl ScanRow {
    fn new(label: String, times: Vec<f64>, values: Vec<f64>) -> ScanRow {
        let (sup, _) = refined_sup(&values);
        let verdict = boundedness(&values);
        ScanRow { label, times, values, sup, verdict }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub s: f64,
    pub r_s: f64,
    pub row: ScanRow,
}

/// For each `s`, `sup_{δ<=t<=T} ∫ (J^s u)² ⟨σ·x+νt⟩^{2r_s} χ²_{ε,τ}(s)`.
pub fn gain_of_regularity_scan(
    traj: &Trajectory,
    region: &MovingRegion,
    r: f64,
    s_grid: &[f64],
    delta: f64,
) -> Result<Vec<GainRow>> {
    let rs: Vec<f64> = s_grid.iter().map(|&s| r_s(r, s)).collect::<Result<_>>()?;
    if delta <= 0.0 {
        return Err(invalid(format!("delta = {delta} must be positive")));
    }
    s_grid
        .iter()
        .zip(rs)
        .map(|(&s, rsv)| {
            let (mut times, mut values) = (Vec::new(), Vec::new());
            for (t, u) in traj.window(delta, f64::INFINITY) {
                seam_check(u, region, t)?;
                let js = apply_bessel(u, s);
                let g = u.grid();
                let mask = window_mask(g, region);
                let total: f64 = js
                    .values()
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask[*i])
                    .map(|(i, v)| {
                        let x = g.point(i);
                        let y = region.sigma[0] * x[0] + region.sigma[1] * x[1] + region.nu * t;
                        let chi = region.cutoff.chi(region.frame(&x, t));
                        (1.0 + y * y).powf(rsv) * chi * chi * v * v
                    })
                    .sum();
                times.push(t);
                values.push(total * g.cell_volume());
            }
            Ok(GainRow { s, r_s: rsv, row: ScanRow::new(format!("J^{s}"), times, values) })
        })
        .collect()
}

/// `∫_{t0}^{t1} ∫_strip (J^order u)² dx dt` by the trapezoid rule over
/// snapshots.
pub fn strip_smoothing_integral(traj: &Trajectory, strip: &MovingRegion, order: f64, t0: f64, t1: f64) -> Result<f64> {
    if !matches!(strip.kind, RegionKind::Strip { .. }) {
        return Err(invalid("strip smoothing needs a strip region"));
    }
    if !(0.0..=DERIVATIVE_CAP as f64).contains(&order) {
        return Err(Error::DerivativeOrder { order: order.ceil() as u32, cap: DERIVATIVE_CAP });
    }
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for (t, u) in traj.window(t0, t1) {
        seam_check(u, strip, t)?;
        let j = apply_bessel(u, order);
        let g = u.grid();
        let mask = window_mask(g, strip);
        let inside: f64 = j
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| mask[*i] && strip.contains(&g.point(*i), t))
            .map(|(_, v)| v * v)
            .sum();
        ts.push(t);
        ys.push(inside * g.cell_volume());
    }
    Ok(trapezoid(&ts, &ys))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpRow {
    pub beta: MultiIndex,
    pub informational: bool,
    pub row: ScanRow,
}

/// Orders above this are run but reported informationally.
pub const EXP_SCAN_ASSERTED_ORDER: u32 = 3;

/// Per multi-index, `sup_{δ<=t<=T} ∫_region (e^{bσ·x} ∂^β u)²`.
pub fn exp_smoothing_scan(
    traj: &Trajectory,
    region: &MovingRegion,
    b: f64,
    betas: &[MultiIndex],
    delta: f64,
) -> Result<Vec<ExpRow>> {
    if b <= 0.0 {
        return Err(invalid(format!("b = {b} must be positive")));
    }
    betas
        .iter()
        .map(|beta| {
            let (mut times, mut values) = (Vec::new(), Vec::new());
            for (t, u) in traj.window(delta, f64::INFINITY) {
                // the seam contract is on the solution; derivatives only
                // magnify the wrapped radiation's relative share
                seam_check(u, region, t)?;
                let d = apply_derivative(u, *beta)?;
                times.push(t);
                values.push(halfspace_norm_unchecked(&d, region, t, WeightKind::Exp { b }).sharp);
            }
            Ok(ExpRow {
                beta: *beta,
                informational: beta.order() > EXP_SCAN_ASSERTED_ORDER,
                row: ScanRow::new(format!("d^{beta}"), times, values),
            })
        })
        .collect()
}

/// Growth of `sup_t ∫_{region ∩ {σ·x < R}} ⟨σ·x⟩^{2r} u²` with `R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationScan {
    pub radii: Vec<f64>,
    pub sup_values: Vec<f64>,
    /// Log-log slope over the upper half of the radii.
    pub tail_exponent: f64,
    pub unbounded: bool,
}

/// A truncated weighted norm growing at least like `R^1` is read as a
/// divergent integral.
pub const TRUNCATION_EXPONENT_THRESHOLD: f64 = 1.0;

pub fn truncation_scan(traj: &Trajectory, region: &MovingRegion, r: f64, radii: &[f64]) -> Result<TruncationScan> {
    if radii.len() < 2 {
        return Err(invalid("truncation scan needs at least two radii"));
    }
    let mut sup_values = vec![0.0f64; radii.len()];
    for (t, u) in traj.window(0.0, f64::INFINITY) {
        seam_check(u, region, t)?;
        let g = u.grid();
        let mask = window_mask(g, region);
        let mut acc = vec![0.0; radii.len()];
        for (i, v) in u.values().iter().enumerate() {
            let x = g.point(i);
            if !mask[i] || !region.contains(&x, t) {
                continue;
            }
            let y = region.sigma[0] * x[0] + region.sigma[1] * x[1];
            let w = (1.0 + y * y).powf(r) * v * v;
            for (a, rr) in acc.iter_mut().zip(radii) {
                if y < *rr {
                    *a += w;
                }
            }
        }
        for (s, a) in sup_values.iter_mut().zip(acc) {
            *s = s.max(a * g.cell_volume());
        }
    }
    let half = radii.len() / 2;
    let xs: Vec<f64> = radii[half..].iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = sup_values[half..].iter().map(|v| v.max(1e-300).ln()).collect();
    let tail_exponent = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { 0.0 };
    Ok(TruncationScan {
        radii: radii.to_vec(),
        sup_values,
        tail_exponent,
        unbounded: tail_exponent > TRUNCATION_EXPONENT_THRESHOLD,
    })
}

// ---------------------------------------------------------------------------
// Linear weighted growth

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearGrowth {
    pub r: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `log value` against `log⟨t⟩` for `t >= 1`.
    pub slope: f64,
    /// `max_t value / (⟨t⟩^r (‖J^{2r} f‖ + ‖⟨x⟩^r f‖))`.
    pub constant: f64,
}

/// `‖⟨x⟩^r S(t) f‖` along `times`, with `S` the linear flow of `model`.
pub fn linear_weighted_growth_check(f: &Field, r: f64, model: Model, times: &[f64]) -> Result<LinearGrowth> {
    let g = f.grid();
    let weight: Vec<f64> = (0..g.len())
        .map(|i| {
            let x = g.point(i);
            (1.0 + x[0] * x[0] + x[1] * x[1]).powf(0.5 * r)
        })
        .collect();
    let rhs = apply_bessel(f, 2.0 * r).norm() + f.mul_samples(&weight).norm();
    let everywhere = MovingRegion::everywhere(CutoffFamily { eps: 1.0, tau: 5.0 });
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let u = linear_propagate(f, t, model)?;
        seam_check(&u, &everywhere, t)?;
        values.push(u.mul_samples(&weight).norm());
    }
    let tail: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 1.0).collect();
    let idx: Vec<usize> = if tail.len() >= 2 { tail } else { (0..times.len()).collect() };
    let xs: Vec<f64> = idx.iter().map(|&i| (1.0 + times[i] * times[i]).sqrt().ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| values[i].ln()).collect();
    let slope = if xs.len() >= 2 { linear_fit(&xs, &ys).0 } else { 0.0 };
    let constant = times
        .iter()
        .zip(&values)
        .map(|(t, v)| v / ((1.0 + t * t).powf(0.5 * r) * rhs))
        .fold(0.0, f64::max);
    Ok(LinearGrowth { r, times: times.to_vec(), values, slope, constant })
}

// ---------------------------------------------------------------------------
// Energy identity

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnergyWeight {
    /// `W ≡ 1`.
    Unit,
    /// `W = χ_{r,ε,τ,σ}`.
    Poly(PolyWeight),
}

impl EnergyWeight {
    /// `F = W²` and its frame derivatives `F'`, `F'''` at `(x, t)`.
    fn square_derivatives(&self, x: &[f64; 2], t: f64) -> [f64; 3] {
        match self {
            EnergyWeight::Unit => [1.0, 0.0, 0.0],
            EnergyWeight::Poly(w) => {
                let p = w.profile_jet(&Jet::var(w.argument(x, t), 0));
                let f = p * p;
                [f.value(), f.derivative([1, 0]), f.derivative([3, 0])]
            }
        }
    }

    fn sigma(&self) -> [f64; 2] {
        match self {
            EnergyWeight::Unit => [1.0, 0.0],
            EnergyWeight::Poly(w) => w.sigma,
        }
    }

    fn nu(&self) -> f64 {
        match self {
            EnergyWeight::Unit => 0.0,
            EnergyWeight::Poly(w) => w.nu,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BOperator {
    Identity,
    Derivative { beta: MultiIndex },
    Bessel { s: f64 },
}

impl BOperator {
    pub fn apply(&self, u: &Field) -> Result<Field> {
        match self {
            BOperator::Identity => Ok(u.clone()),
            BOperator::Derivative { beta } => apply_derivative(u, *beta),
            BOperator::Bessel { s } => Ok(apply_bessel(u, *s)),
        }
    }
}

/// Terms of `d/dt E = ∫ v² ∂_t F - 2A₂ - 2A₃` for `E = ∫ v² F`, `v = Bu`,
/// `F = W²`, with
/// `A₂ = ½∫⟨∇v,∇v⟩_M F' - ½σ₁|σ|² ∫ v² F'''` and `A₃ = ∫ B(u∂₁u) v F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyResidual {
    pub times: Vec<f64>,
    /// Centered difference of `E`.
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
    /// `A₂ = ∫ ∂₁Δv · v F` evaluated directly.
    pub a2_direct: Vec<f64>,
    pub a3: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_residual: f64,
    /// `max |lhs|` for scale.
    pub scale: f64,
}

pub fn energy_identity_residual(
    traj: &Trajectory,
    solver: &Solver,
    weight: &EnergyWeight,
    b: &BOperator,
) -> Result<EnergyResidual> {
    if traj.config.snapshot_stride != 1 {
        return Err(invalid(format!(
            "energy identity needs every step, got snapshot stride {}",
            traj.config.snapshot_stride
        )));
    }
    let n = traj.snapshots.len();
    if n < 3 {
        return Err(invalid("energy identity needs at least three snapshots"));
    }
    let g = traj.snapshots[0].grid().clone();
    let sigma = weight.sigma();
    let dim = g.dim();
    let m = cone_matrix(&sigma[..dim]);
    let sig_sq = sigma[0] * sigma[0] + sigma[1] * sigma[1];
    let nu = weight.nu();
    let dv = g.cell_volume();

    let energy = |k: usize| -> Result<f64> {
        let v = b.apply(&traj.snapshots[k])?;
        let t = traj.times[k];
        let mut memo: HashMap<u64, f64> = HashMap::new();
        Ok(v.values()
            .iter()
            .enumerate()
            .map(|(i, vi)| {
                let x = g.point(i);
                let key = (sigma[0] * x[0] + sigma[1] * x[1]).to_bits();
                vi * vi * *memo.entry(key).or_insert_with(|| weight.square_derivatives(&x, t)[0])
            })
            .sum::<f64>()
            * dv)
    };

    let mut out = EnergyResidual {
        times: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        a1: Vec::new(),
        a2: Vec::new(),
        a2_direct: Vec::new(),
        a3: Vec::new(),
        residual: Vec::new(),
        max_residual: 0.0,
        scale: 0.0,
    };
    let mut energies = Vec::with_capacity(n);
    for k in 0..n {
        energies.push(energy(k)?);
    }
    for k in 1..n - 1 {
        let (t, u) = (traj.times[k], &traj.snapshots[k]);
        let lhs = (energies[k + 1] - energies[k - 1]) / (traj.times[k + 1] - traj.times[k - 1]);
        let v = b.apply(u)?;
        let grads: Vec<Field> = (0..dim)
            .map(|a| {
                let mut o = [0u32; 2];
                o[a] = 1;
                apply_derivative(&v, MultiIndex(o))
            })
            .collect::<Result<_>>()?;
        let dispersive = {
            let mut o = [3u32, 0];
            let d1 = apply_derivative(&v, MultiIndex(o))?;
            if dim == 2 {
                o = [1, 2];
                d1.add(&apply_derivative(&v, MultiIndex(o))?)?
            } else {
                d1
            }
        };
        // B applied to -N(u) = u∂₁u with the solver's dealiasing
        let bn = b.apply(&solver.nonlinear_field(u))?;
        let (mut a1, mut a2, mut a2d, mut a3) = (0.0, 0.0, 0.0, 0.0);
        let mut memo: HashMap<u64, [f64; 3]> = HashMap::new();
        for i in 0..g.len() {
            let x = g.point(i);
            let key = (sigma[0] * x[0] + sigma[1] * x[1]).to_bits();
            let [f, f1, f3] = *memo.entry(key).or_insert_with(|| weight.square_derivatives(&x, t));
            let vi = v.values()[i];
            let gv = [grads[0].values()[i], if dim == 2 { grads[1].values()[i] } else { 0.0 }];
            let mut quad = 0.0;
            for p in 0..dim {
                for q in 0..dim {
                    quad += gv[p] * m[(p, q)] * gv[q];
                }
            }
            a1 += vi * vi * nu * f1;
            a2 += 0.5 * quad * f1 - 0.5 * sigma[0] * sig_sq * vi * vi * f3;
            a2d += dispersive.values()[i] * vi * f;
            a3 -= bn.values()[i] * vi * f;
        }
        let (a1, a2, a2d, a3) = (a1 * dv, a2 * dv, a2d * dv, a3 * dv);
        let rhs = a1 - 2.0 * a2 - 2.0 * a3;
        out.times.push(t);
        out.lhs.push(lhs);
        out.rhs.push(rhs);
        out.a1.push(a1);
        out.a2.push(a2);
        out.a2_direct.push(a2d);
        out.a3.push(a3);
        out.residual.push((lhs - rhs).abs());
    }
    out.max_residual = out.residual.iter().copied().fold(0.0, f64::max);
    out.scale = out.lhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub t: f64,
    pub quantity_id: String,
    pub region_id: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    /// Reported but excluded from the overall pass.
    pub informational: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
    pub fitted: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, String>,
}

impl DiagnosticsReport {
    pub fn push_series(&mut self, quantity: &str, region: &str, times: &[f64], values: &[f64]) {
        for (t, v) in times.iter().zip(values) {
            self.rows.push(ReportRow { t: *t, quantity_id: quantity.into(), region_id: region.into(), value: *v });
        }
    }

    pub fn verdict(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), passed, informational: false, detail: detail.into() });
    }

    pub fn info(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.verdicts.push(Verdict { name: name.into(), passed, informational: true, detail: detail.into() });
    }

    pub fn fit(&mut self, name: impl Into<String>, value: f64) {
        self.fitted.insert(name.into(), value);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().filter(|v| !v.informational).all(|v| v.passed)
    }

    pub fn merge(&mut self, other: DiagnosticsReport) {
        self.rows.extend(other.rows);
        self.verdicts.extend(other.verdicts);
        self.fitted.extend(other.fitted);
        self.metadata.extend(other.metadata);
    }
}
