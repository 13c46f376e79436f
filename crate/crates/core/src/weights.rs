//! Cutoff partitions, polynomial and exponential weights, truncated weights.
//!
//! Everything is assembled from one C^∞ step
//! `S(t) = f(t) / (f(t) + f(1 - t))`, `f(t) = e^{-1/t}`, which equals 0 for
//! `t <= 0` and 1 for `t >= 1`. Its primitive `I(t) = ∫_0^t S` is computed by
//! Gauss–Legendre quadrature; all derivatives come from [`Jet`] arithmetic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::jet::{Jet, Series, ORDER};
use crate::quadrature;

/// Values of `f(t) = e^{-1/t}` below this argument underflow to zero.
const FLAT_EDGE: f64 = 1.0 / 700.0;

/// The step `S(t)` as a plain float.
pub fn smooth_step_value(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

fn step_series(t0: f64) -> Series {
    let mut s = [0.0; ORDER + 1];
    if t0 <= 0.0 {
        return s;
    }
    if t0 >= 1.0 {
        s[0] = 1.0;
        return s;
    }
    let u = Jet::var(t0, 0);
    let f = |v: Jet| {
        if v.value() < FLAT_EDGE {
            Jet::constant(0.0)
        } else {
            (-v.recip()).exp()
        }
    };
    let a = f(u);
    let b = f(1.0 - u);
    (a / (a + b)).series0()
}

/// `I(t) = ∫_0^t S`, equal to `t - 1/2` for `t >= 1`.
pub fn step_integral_value(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        t - 0.5
    } else if t <= 0.5 {
        quadrature::integrate(smooth_step_value, 0.0, t, 4)
    } else {
        // S(u) + S(1 - u) = 1 gives I(t) = t - 1/2 + I(1 - t)
        t - 0.5 + quadrature::integrate(smooth_step_value, 0.0, 1.0 - t, 4)
    }
}

/// `S(t)` composed with a jet.
pub fn smooth_step(t: &Jet) -> Jet {
    t.compose(&step_series(t.value()))
}

/// `I(t)` composed with a jet.
pub fn step_integral(t: &Jet) -> Jet {
    let s = step_series(t.value());
    let mut series = [0.0; ORDER + 1];
    series[0] = step_integral_value(t.value());
    for k in 1..=ORDER {
        series[k] = s[k - 1] / k as f64;
    }
    t.compose(&series)
}

/// Smooth monotone saturation: identity below `onset`, constant
/// `onset + width/2` above `onset + width`, slope in `[0, 1]` in between.
pub fn soft_saturate(y: &Jet, onset: f64, width: f64) -> Jet {
    if y.value() <= onset {
        return *y;
    }
    let t = (*y - onset) / width;
    // J(t) = t - I(t) has J' = 1 - S
    let j = t - step_integral(&t);
    j * width + onset
}

/// The partition `χ + φ + ψ = 1` adapted to `(ε, τ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffFamily {
    pub eps: f64,
    pub tau: f64,
}

/// Construct the cutoff family; requires `ε > 0` and `τ >= 5ε`.
pub fn build_cutoff_family(eps: f64, tau: f64) -> Result<CutoffFamily> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(format!("cutoff requires eps > 0, got {eps}")));
    }
    if !(tau.is_finite() && tau >= 5.0 * eps) {
        return Err(invalid(format!("cutoff requires tau >= 5 eps, got eps = {eps}, tau = {tau}")));
    }
    Ok(CutoffFamily { eps, tau })
}

impl CutoffFamily {
    /// Plateau height of χ' on `[2ε, τ - ε]`.
    pub fn slope(&self) -> f64 {
        1.0 / (self.tau - 2.0 * self.eps)
    }

    /// χ' is a plateau rising on `[ε, 2ε]` and falling on `[τ - ε, τ]`;
    /// χ is its primitive.
    pub fn chi_jet(&self, s: &Jet) -> Jet {
        let e = self.eps;
        // exact outside the transition; the primitives below cancel badly for s >> τ
        if s.value() <= e {
            return Jet::constant(0.0);
        }
        if s.value() >= self.tau {
            return Jet::constant(1.0);
        }
        let up = step_integral(&((*s - e) / e));
        let down = step_integral(&((*s - (self.tau - e)) / e));
        (up - down) * (self.slope() * e)
    }

    pub fn psi_jet(&self, s: &Jet) -> Jet {
        let q = 0.25 * self.eps;
        1.0 - smooth_step(&((*s - q) / q))
    }

    pub fn phi_jet(&self, s: &Jet) -> Jet {
        1.0 - self.chi_jet(s) - self.psi_jet(s)
    }

    pub fn chi(&self, s: f64) -> f64 {
        let e = self.eps;
        if s <= e {
            return 0.0;
        }
        if s >= self.tau {
            return 1.0;
        }
        self.slope()
            * e
            * (step_integral_value((s - e) / e) - step_integral_value((s - self.tau + e) / e))
    }

    pub fn psi(&self, s: f64) -> f64 {
        let q = 0.25 * self.eps;
        1.0 - smooth_step_value((s - q) / q)
    }

    pub fn phi(&self, s: f64) -> f64 {
        1.0 - self.chi(s) - self.psi(s)
    }

    /// Analytic `χ^{(j)}(s)` for `j <= ORDER`.
    pub fn chi_derivative(&self, s: f64, j: usize) -> f64 {
        self.chi_jet(&Jet::var(s, 0)).derivative([j, 0])
    }

    /// Check the partition properties on `samples` points of `[-τ, 2τ]`.
    pub fn verify(&self, samples: usize) -> CutoffReport {
        let (e, t) = (self.eps, self.tau);
        let xs: Vec<f64> =
            (0..samples).map(|i| -t + 3.0 * t * i as f64 / (samples - 1) as f64).collect();
        let jets: Vec<(f64, Jet, Jet, Jet)> = xs
            .iter()
            .map(|&x| {
                let s = Jet::var(x, 0);
                (x, self.chi_jet(&s), self.phi_jet(&s), self.psi_jet(&s))
            })
            .collect();
        let mut props = Vec::new();
        let mut check = |name: &str, ok: bool, detail: String| {
            props.push(CutoffProperty { name: name.to_string(), passed: ok, detail })
        };
        let min_dchi = jets.iter().map(|j| j.1.derivative([1, 0])).fold(f64::INFINITY, f64::min);
        check("chi' >= 0", min_dchi >= -1e-15, format!("min chi' = {min_dchi:e}"));
        let edge = jets
            .iter()
            .filter(|j| j.0 <= e || j.0 >= t)
            .map(|j| if j.0 <= e { j.1.value().abs() } else { (j.1.value() - 1.0).abs() })
            .fold(0.0, f64::max);
        check("chi = 0 below eps, 1 above tau", edge < 1e-14, format!("max deviation {edge:e}"));
        let bound = 1.0 / (10.0 * (t - e));
        let min_mid = jets
            .iter()
            .filter(|j| j.0 >= 2.0 * e && j.0 <= t - 2.0 * e)
            .map(|j| j.1.derivative([1, 0]))
            .fold(f64::INFINITY, f64::min);
        check(
            "chi' >= 1/(10(tau - eps)) on [2eps, tau - 2eps]",
            min_mid >= bound,
            format!("min {min_mid:e} vs bound {bound:e}"),
        );
        let achieved = jets.iter().filter(|j| j.0 > 3.0 * e).map(|j| j.1.value()).fold(f64::INFINITY, f64::min);
        let supp_dchi = jets
            .iter()
            .filter(|j| j.0 < e || j.0 > t)
            .map(|j| j.1.derivative([1, 0]).abs())
            .fold(0.0, f64::max);
        check("supp chi' in [eps, tau]", supp_dchi == 0.0, format!("max |chi'| outside {supp_dchi:e}"));
        let supp_phi = jets
            .iter()
            .filter(|j| j.0 < 0.25 * e || j.0 > t)
            .map(|j| j.2.value().abs())
            .fold(0.0, f64::max);
        check("supp phi in [eps/4, tau]", supp_phi < 1e-15, format!("max |phi| outside {supp_phi:e}"));
        let phi_one = jets
            .iter()
            .filter(|j| j.0 >= 0.5 * e && j.0 <= e)
            .map(|j| (j.2.value() - 1.0).abs())
            .fold(0.0, f64::max);
        check("phi = 1 on [eps/2, eps]", phi_one < 1e-15, format!("max deviation {phi_one:e}"));
        let supp_psi = jets.iter().filter(|j| j.0 > 0.5 * e).map(|j| j.3.value().abs()).fold(0.0, f64::max);
        check("supp psi in (-inf, eps/2]", supp_psi == 0.0, format!("max |psi| beyond {supp_psi:e}"));
        let pou = jets
            .iter()
            .map(|j| (j.1.value() + j.2.value() + j.3.value() - 1.0).abs())
            .fold(0.0, f64::max);
        check("chi + phi + psi = 1", pou <= 1e-12, format!("max deviation {pou:e}"));
        CutoffReport {
            eps: e,
            tau: t,
            samples,
            properties: props,
            achieved_chi_lower_bound: achieved,
            stated_chi_lower_bound: e / (2.0 * (t - 3.0 * e)),
        }
    }

    /// Fitted constant `C` in `|χ^{(j)}| <= C χ_{inner}`; `None` when the
    /// inner cutoff vanishes somewhere on the support of `χ^{(j)}`.
    pub fn derivative_domination(&self, j: usize, inner: &CutoffFamily, samples: usize) -> Option<f64> {
        let (lo, hi) = (self.eps, self.tau);
        let mut c: f64 = 0.0;
        for i in 0..samples {
            let x = lo + (hi - lo) * i as f64 / (samples - 1) as f64;
            let d = self.chi_derivative(x, j).abs();
            if d == 0.0 {
                continue;
            }
            let w = inner.chi(x);
            if w <= 0.0 {
                return None;
            }
            c = c.max(d / w);
        }
        Some(c)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffProperty {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CutoffReport {
    pub eps: f64,
    pub tau: f64,
    pub samples: usize,
    pub properties: Vec<CutoffProperty>,
    /// `min χ` over `(3ε, 2τ]` for this construction.
    pub achieved_chi_lower_bound: f64,
    /// The stated bound `ε / (2(τ - 3ε))`, recorded for comparison only.
    pub stated_chi_lower_bound: f64,
}

impl CutoffReport {
    pub fn all_passed(&self) -> bool {
        self.properties.iter().all(|p| p.passed)
    }
}

/// Smooth saturation of a weight's bracket between `onset` and `onset + width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub onset: f64,
    pub width: f64,
}

impl Saturation {
    /// Saturation for a window of the given box length: brackets follow
    /// `⟨·⟩` up to 0.40 L and are constant beyond 0.45 L.
    pub fn for_box(box_length: f64) -> Saturation {
        Saturation { onset: 0.40 * box_length, width: 0.05 * box_length }
    }

    pub fn apply(&self, y: &Jet) -> Jet {
        soft_saturate(y, self.onset, self.width)
    }
}

/// `χ_{r,ε,τ,σ}(x, t) = ⟨σ·x + νt + κ⟩^r χ_{ε,τ}(σ·x + νt + κ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyWeight {
    pub r: f64,
    pub cutoff: CutoffFamily,
    pub sigma: [f64; 2],
    pub nu: f64,
    pub kappa: f64,
    pub saturation: Option<Saturation>,
}

impl PolyWeight {
    pub fn new(r: f64, cutoff: CutoffFamily, sigma: [f64; 2], nu: f64, kappa: f64) -> PolyWeight {
        PolyWeight { r, cutoff, sigma, nu, kappa, saturation: None }
    }

    pub fn argument(&self, x: &[f64; 2], t: f64) -> f64 {
        self.sigma[0] * x[0] + self.sigma[1] * x[1] + self.nu * t + self.kappa
    }

    /// The profile `s ↦ ⟨s⟩^r χ(s)` as a jet in `s`.
    pub fn profile_jet(&self, s: &Jet) -> Jet {
        let mut b = s.bracket();
        if let Some(sat) = self.saturation {
            b = sat.apply(&b);
        }
        let chi = self.cutoff.chi_jet(s);
        if self.r == 0.0 {
            chi
        } else {
            b.powf(self.r) * chi
        }
    }

    pub fn profile_derivative(&self, s: f64, j: usize) -> f64 {
        self.profile_jet(&Jet::var(s, 0)).derivative([j, 0])
    }
}

/// Weight value at `(x, t)`.
pub fn eval_poly_weight(w: &PolyWeight, x: &[f64; 2], t: f64) -> f64 {
    w.profile_jet(&Jet::constant(w.argument(x, t))).value()
}

/// The approximants `q_η`, `ρ_η`, `p_η = q_η²` of `e^{bx}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpWeightFamily {
    pub b: f64,
    pub eta: f64,
}

pub fn exp_weight_family(b: f64, eta: f64) -> Result<ExpWeightFamily> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("exponential weight requires b > 0, got {b}")));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(invalid(format!("exponential weight requires eta >= 0, got {eta}")));
    }
    Ok(ExpWeightFamily { b, eta })
}

impl ExpWeightFamily {
    /// `q_η = e^{bx} (1 + η e^{2bx})^{-1/2}`.
    pub fn q_jet(&self, x: &Jet) -> Jet {
        let e = (*x * self.b).exp();
        e * (e * e * self.eta + 1.0).powf(-0.5)
    }

    /// `ρ_η = e^{bx} (1 + η e^{2bx})^{-1}`.
    pub fn rho_jet(&self, x: &Jet) -> Jet {
        let e = (*x * self.b).exp();
        e * (e * e * self.eta + 1.0).recip()
    }

    /// `p_η = q_η²`.
    pub fn p_jet(&self, x: &Jet) -> Jet {
        let e = (*x * self.b).exp();
        e * e * (e * e * self.eta + 1.0).recip()
    }

    pub fn q(&self, x: f64) -> f64 {
        self.q_jet(&Jet::constant(x)).value()
    }

    pub fn rho(&self, x: f64) -> f64 {
        self.rho_jet(&Jet::constant(x)).value()
    }

    pub fn p(&self, x: f64) -> f64 {
        self.p_jet(&Jet::constant(x)).value()
    }
}

/// `w_N(x) = w̃_N(|x|)` with `w̃_N = ⟨x⟩` for `|x| <= N` and `2N` for `|x| >= 3N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedWeight {
    pub n: f64,
    pub dim: usize,
}

pub fn truncated_weight(n: f64, dim: usize) -> Result<TruncatedWeight> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(invalid(format!("truncated weight requires N >= 1, got {n}")));
    }
    if !(1..=2).contains(&dim) {
        return Err(invalid(format!("truncated weight dimension must be 1 or 2, got {dim}")));
    }
    Ok(TruncatedWeight { n, dim })
}

impl TruncatedWeight {
    /// Saturation of `⟨x⟩` from `⟨N⟩` to the plateau `2N`, reached before `|x| = 3N`.
    fn saturation(&self) -> Saturation {
        let onset = (1.0 + self.n * self.n).sqrt();
        Saturation { onset, width: 2.0 * (2.0 * self.n - onset) }
    }

    pub fn jet(&self, x: &[Jet; 2]) -> Jet {
        let mut q = x[0] * x[0] + 1.0;
        if self.dim == 2 {
            q = q + x[1] * x[1];
        }
        self.saturation().apply(&q.sqrt())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let p = [x[0], if self.dim == 2 { x[1] } else { 0.0 }];
        self.jet(&[Jet::constant(p[0]), Jet::constant(p[1])]).value()
    }

    /// `∂^α (w_N^r)` at `x`.
    pub fn power_derivative(&self, r: f64, x: &[f64], alpha: [usize; 2]) -> f64 {
        let p = [x[0], if self.dim == 2 { x[1] } else { 0.0 }];
        self.jet(&Jet::point(&p)).powf(r).derivative(alpha)
    }
}
