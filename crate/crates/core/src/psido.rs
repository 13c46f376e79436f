//! Pseudo-differential calculus for symbols in `𝕊^{m,q}_{σ,ω}`.
//!
//! A symbol in this class obeys
//! `|∂x^α ∂ξ^β a| <= c ⟨σ·x + ω⟩^{q - |α|} ⟨ξ⟩^{m - |β|}`.
//!
//! Quantization is `Ψ_a f(x) = ∫ a(x, ζ) f̂(ζ) e^{2πi x·ζ} dζ` with the
//! frequency `ζ` in cycles per unit length. Symbols here are evaluated at
//! the angular wavenumber `ξ = 2πζ`, so a symbol `a(x, ξ)` stands for
//! `a(x, 2πζ)` in that formula. Under this rescaling the composition
//! coefficient `(2πi)^{-|β|} ∂ζ^β` becomes `(-i)^{|β|} ∂ξ^β`.
//!
//! Symbols are sums of separable terms `c · X(x) Ξ(ξ)` whose factors carry
//! analytic derivatives, plus an optional general part sampled pointwise.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::jet::Jet;
use crate::spectral::{apply_bessel, make_grid, ComplexField, Field, Grid, MultiIndex};
use crate::weights::CutoffFamily;

pub type FactorFn = Arc<dyn Fn(&[Jet; 2]) -> Jet + Send + Sync>;
pub type GeneralFn = Arc<dyn Fn(&[f64; 2], &[f64; 2]) -> Complex64 + Send + Sync>;

/// A smooth real function of `x` or of `ξ`.
#[derive(Clone)]
pub enum Factor {
    One,
    Analytic { label: String, f: FactorFn },
    Derivative { base: Box<Factor>, alpha: [usize; 2] },
    Product(Vec<Factor>),
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

impl Factor {
    pub fn analytic(label: impl Into<String>, f: impl Fn(&[Jet; 2]) -> Jet + Send + Sync + 'static) -> Factor {
        Factor::Analytic { label: label.into(), f: Arc::new(f) }
    }

    /// `⟨σ·x + ω⟩^q`.
    pub fn bracket(q: f64, sigma: [f64; 2], omega: f64) -> Factor {
        Factor::analytic(format!("<s.x+{omega}>^{q}"), move |x| {
            (x[0] * sigma[0] + x[1] * sigma[1] + omega).bracket().powf(q)
        })
    }

    /// `⟨σ·x + ω⟩^q χ_{ε,τ}(σ·x + ω)`.
    pub fn cutoff_bracket(q: f64, sigma: [f64; 2], omega: f64, cutoff: CutoffFamily) -> Factor {
        Factor::analytic(format!("<s.x+{omega}>^{q} chi"), move |x| {
            let s = x[0] * sigma[0] + x[1] * sigma[1] + omega;
            s.bracket().powf(q) * cutoff.chi_jet(&s)
        })
    }

    /// `χ_{ε,τ}(σ·x + ω)`.
    pub fn cutoff(sigma: [f64; 2], omega: f64, cutoff: CutoffFamily) -> Factor {
        Factor::analytic("chi", move |x| cutoff.chi_jet(&(x[0] * sigma[0] + x[1] * sigma[1] + omega)))
    }

    /// `⟨ξ⟩^m`.
    pub fn japanese(m: f64) -> Factor {
        Factor::analytic(format!("<xi>^{m}"), move |xi| (xi[0] * xi[0] + xi[1] * xi[1] + 1.0).powf(0.5 * m))
    }

    pub fn label(&self) -> String {
        match self {
            Factor::One => "1".into(),
            Factor::Analytic { label, .. } => label.clone(),
            Factor::Derivative { base, alpha } => format!("d^({},{}) {}", alpha[0], alpha[1], base.label()),
            Factor::Product(v) => v.iter().map(|f| f.label()).collect::<Vec<_>>().join(" * "),
        }
    }

    pub fn derivative(&self, alpha: [usize; 2]) -> Factor {
        if alpha == [0, 0] {
            return self.clone();
        }
        match self {
            Factor::Derivative { base, alpha: a } => Factor::Derivative {
                base: base.clone(),
                alpha: [a[0] + alpha[0], a[1] + alpha[1]],
            },
            other => Factor::Derivative { base: Box::new(other.clone()), alpha },
        }
    }

    pub fn times(&self, other: &Factor) -> Factor {
        match (self, other) {
            (Factor::One, o) | (o, Factor::One) => o.clone(),
            (a, b) => Factor::Product(vec![a.clone(), b.clone()]),
        }
    }

    /// Taylor expansion in the factor's own variables at `p`.
    pub fn taylor(&self, p: [f64; 2]) -> Jet {
        match self {
            Factor::One => Jet::constant(1.0),
            Factor::Analytic { f, .. } => f(&Jet::point(&p)),
            Factor::Derivative { base, alpha } => base.taylor(p).differentiate(*alpha),
            Factor::Product(v) => v.iter().fold(Jet::constant(1.0), |acc, f| acc * f.taylor(p)),
        }
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Analytic { f, .. } => f(&[Jet::constant(p[0]), Jet::constant(p[1])]).value(),
            Factor::Product(v) => v.iter().map(|f| f.value(p)).product(),
            Factor::Derivative { .. } => self.taylor(p).value(),
        }
    }

    fn is_one(&self) -> bool {
        matches!(self, Factor::One)
    }
}

#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: Complex64,
    pub x: Factor,
    pub xi: Factor,
}

/// A symbol with its declared class `𝕊^{m,q}_{σ,ω}`.
#[derive(Clone)]
pub struct Symbol {
    pub label: String,
    pub dim: usize,
    pub m: f64,
    pub q: f64,
    pub sigma: [f64; 2],
    pub omega: f64,
    terms: Vec<Term>,
    general: Option<GeneralFn>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("m", &self.m)
            .field("q", &self.q)
            .field("terms", &self.terms.len())
            .field("general", &self.general.is_some())
            .finish()
    }
}

impl Symbol {
    fn base(label: String, dim: usize, m: f64, q: f64, sigma: [f64; 2], omega: f64) -> Symbol {
        Symbol { label, dim, m, q, sigma, omega, terms: Vec::new(), general: None }
    }

    pub fn from_terms(
        label: impl Into<String>,
        dim: usize,
        (m, q): (f64, f64),
        sigma: [f64; 2],
        omega: f64,
        terms: Vec<Term>,
    ) -> Symbol {
        let mut s = Symbol::base(label.into(), dim, m, q, sigma, omega);
        s.terms = terms;
        s
    }

    /// A symbol given only pointwise; derivatives use centered differences.
    pub fn general(
        label: impl Into<String>,
        dim: usize,
        (m, q): (f64, f64),
        sigma: [f64; 2],
        omega: f64,
        f: impl Fn(&[f64; 2], &[f64; 2]) -> Complex64 + Send + Sync + 'static,
    ) -> Symbol {
        let mut s = Symbol::base(label.into(), dim, m, q, sigma, omega);
        s.general = Some(Arc::new(f));
        s
    }

    pub fn identity(dim: usize) -> Symbol {
        Symbol::from_terms("1", dim, (0.0, 0.0), e1(), 0.0, vec![term(Factor::One, Factor::One)])
    }

    /// `⟨ξ⟩^m`, the Bessel potential `J^m`.
    pub fn bessel(dim: usize, m: f64) -> Symbol {
        Symbol::from_terms(format!("<xi>^{m}"), dim, (m, 0.0), e1(), 0.0, vec![term(Factor::One, Factor::japanese(m))])
    }

    /// `⟨σ·x + ω⟩^q`.
    pub fn bracket(dim: usize, q: f64, sigma: [f64; 2], omega: f64) -> Symbol {
        Symbol::from_terms(
            format!("<s.x+w>^{q}"),
            dim,
            (0.0, q),
            sigma,
            omega,
            vec![term(Factor::bracket(q, sigma, omega), Factor::One)],
        )
    }

    /// `⟨σ·x + ω⟩^q ⟨ξ⟩^m`.
    pub fn bracket_bessel(dim: usize, q: f64, m: f64, sigma: [f64; 2], omega: f64) -> Symbol {
        Symbol::from_terms(
            format!("<s.x+w>^{q}<xi>^{m}"),
            dim,
            (m, q),
            sigma,
            omega,
            vec![term(Factor::bracket(q, sigma, omega), Factor::japanese(m))],
        )
    }

    /// `⟨σ·x + ω⟩^q χ(σ·x + ω) ⟨ξ⟩^m`, the cutoff-dressed member of the class.
    pub fn cutoff_bracket_bessel(
        dim: usize,
        q: f64,
        m: f64,
        sigma: [f64; 2],
        omega: f64,
        cutoff: CutoffFamily,
    ) -> Symbol {
        Symbol::from_terms(
            format!("<s.x+w>^{q} chi <xi>^{m}"),
            dim,
            (m, q),
            sigma,
            omega,
            vec![term(Factor::cutoff_bracket(q, sigma, omega, cutoff), Factor::japanese(m))],
        )
    }

    /// The same symbol with a different declared order (used to probe the
    /// divergence flag).
    pub fn with_order(mut self, m: f64, q: f64) -> Symbol {
        self.m = m;
        self.q = q;
        self
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_separable(&self) -> bool {
        self.general.is_none()
    }

    pub fn eval(&self, x: &[f64; 2], xi: &[f64; 2]) -> Complex64 {
        let mut v: Complex64 = self.terms.iter().map(|t| t.coeff * t.x.value(*x) * t.xi.value(*xi)).sum();
        if let Some(g) = &self.general {
            v += g(x, xi);
        }
        v
    }

    /// Sample this symbol on `grid` for repeated application.
    pub fn operator(&self, grid: &Arc<Grid>) -> Result<Operator> {
        if grid.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: grid.dim() });
        }
        let pts: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
        let wvs: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.wavevector(i)).collect();
        let terms = self
            .terms
            .iter()
            .map(|t| SampledTerm {
                coeff: t.coeff,
                x: if t.x.is_one() { None } else { Some(pts.par_iter().map(|p| t.x.value(*p)).collect()) },
                xi: if t.xi.is_one() { None } else { Some(wvs.par_iter().map(|p| t.xi.value(*p)).collect()) },
            })
            .collect();
        if self.general.is_some() && grid.len() > 16384 {
            return Err(invalid("non-separable symbols are limited to 16384 grid points"));
        }
        Ok(Operator { grid: grid.clone(), terms, general: self.general.clone() })
    }
}

fn e1() -> [f64; 2] {
    [1.0, 0.0]
}

fn term(x: Factor, xi: Factor) -> Term {
    Term { coeff: Complex64::new(1.0, 0.0), x, xi }
}

struct SampledTerm {
    coeff: Complex64,
    x: Option<Vec<f64>>,
    xi: Option<Vec<f64>>,
}

/// A symbol sampled on a grid.
pub struct Operator {
    grid: Arc<Grid>,
    terms: Vec<SampledTerm>,
    general: Option<GeneralFn>,
}

impl Operator {
    pub fn apply(&self, f: &ComplexField) -> Result<ComplexField> {
        if **f.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let spec = f.spectrum();
        let n = self.grid.len();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for t in &self.terms {
            let mut s = spec.clone();
            if let Some(m) = &t.xi {
                for (c, w) in s.iter_mut().zip(m) {
                    *c *= w;
                }
            }
            self.grid.fft_inverse(&mut s);
            match &t.x {
                Some(xs) => {
                    for ((o, v), w) in out.iter_mut().zip(&s).zip(xs) {
                        *o += t.coeff * v * w;
                    }
                }
                None => {
                    for (o, v) in out.iter_mut().zip(&s) {
                        *o += t.coeff * v;
                    }
                }
            }
        }
        if let Some(g) = &self.general {
            let dense = dense_apply(&self.grid, &spec, |x, xi| g(x, xi));
            for (o, d) in out.iter_mut().zip(dense) {
                *o += d;
            }
        }
        ComplexField::new(self.grid.clone(), out)
    }

    pub fn apply_real(&self, f: &Field) -> Result<ComplexField> {
        self.apply(&ComplexField::from(f))
    }
}

/// Direct evaluation of `N^{-n} Σ_k a(x_j, ξ_k) F_k e^{iξ_k·(x_j - x_0)}`.
fn dense_apply(
    grid: &Arc<Grid>,
    spec: &[Complex64],
    a: impl Fn(&[f64; 2], &[f64; 2]) -> Complex64 + Sync,
) -> Vec<Complex64> {
    let n = grid.len();
    let x0 = grid.point(0);
    let wvs: Vec<[f64; 2]> = (0..n).map(|k| grid.wavevector(k)).collect();
    (0..n)
        .into_par_iter()
        .map(|j| {
            let x = grid.point(j);
            let d = [x[0] - x0[0], x[1] - x0[1]];
            let s: Complex64 = wvs
                .iter()
                .zip(spec)
                .map(|(xi, c)| a(&x, xi) * c * Complex64::from_polar(1.0, xi[0] * d[0] + xi[1] * d[1]))
                .sum();
            s / n as f64
        })
        .collect()
}

/// `Ψ_a f`.
pub fn quantize_apply(a: &Symbol, f: &Field) -> Result<ComplexField> {
    a.operator(f.grid())?.apply_real(f)
}

// ---------------------------------------------------------------------------
// Class seminorms

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeminormEntry {
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    pub value: f64,
    /// Same seminorm with twice the points (doubled frequency range).
    pub refined_frequency: f64,
    /// Same seminorm on a doubled box (doubled spatial range).
    pub refined_space: f64,
    pub diverges: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeminormTable {
    pub symbol: String,
    pub m: f64,
    pub q: f64,
    pub max_order: u32,
    pub entries: Vec<SeminormEntry>,
}

impl SeminormTable {
    pub fn any_divergent(&self) -> bool {
        self.entries.iter().any(|e| e.diverges)
    }

    pub fn max_value(&self) -> f64 {
        self.entries.iter().map(|e| e.value).fold(0.0, f64::max)
    }
}

/// A seminorm is flagged divergent when refinement raises it by this factor.
pub const DIVERGENCE_RATIO: f64 = 1.5;

/// Estimated seminorms `sup |∂x^α ∂ξ^β a| / (⟨σ·x+ω⟩^{q-|α|} ⟨ξ⟩^{m-|β|})`
/// for `|α|, |β| <= max_order`, with a divergence flag under refinement.
pub fn class_seminorms(a: &Symbol, grid: &Arc<Grid>, max_order: u32) -> Result<SeminormTable> {
    if max_order > 3 {
        return Err(invalid(format!("seminorm order {max_order} above 3")));
    }
    if grid.dim() != a.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: grid.dim() });
    }
    let dim = grid.dim();
    let n = grid.points(0);
    let l = grid.box_length(0);
    let fine_freq = make_grid(dim, l, 2 * n)?;
    let fine_space = make_grid(dim, 2.0 * l, 2 * n)?;
    let base = seminorm_values(a, grid, max_order);
    let ff = seminorm_values(a, &fine_freq, max_order);
    let fs = seminorm_values(a, &fine_space, max_order);
    let entries = base
        .into_iter()
        .zip(ff)
        .zip(fs)
        .map(|(((alpha, beta, v), (_, _, vf)), (_, _, vs))| SeminormEntry {
            alpha,
            beta,
            value: v,
            refined_frequency: vf,
            refined_space: vs,
            diverges: vf > DIVERGENCE_RATIO * v.max(1e-300) || vs > DIVERGENCE_RATIO * v.max(1e-300),
        })
        .collect();
    Ok(SeminormTable { symbol: a.label.clone(), m: a.m, q: a.q, max_order, entries })
}

/// `count` evenly spaced samples spanning the range of `values`, endpoints
/// included.
fn sample_axis(values: &[f64], count: usize) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn multi_indices(dim: usize, max_order: u32) -> Vec<MultiIndex> {
    (0..=max_order).flat_map(|k| MultiIndex::of_order(dim, k)).collect()
}

fn seminorm_values(a: &Symbol, grid: &Arc<Grid>, max_order: u32) -> Vec<(MultiIndex, MultiIndex, f64)> {
    let dim = grid.dim();
    let per_axis = if dim == 1 { 129 } else { 17 };
    let xs: Vec<Vec<f64>> = (0..dim).map(|ax| sample_axis(&grid.coords(ax), per_axis)).collect();
    let ks: Vec<Vec<f64>> = (0..dim).map(|ax| sample_axis(&grid.wavenumbers(ax), per_axis)).collect();
    let tensor = |axes: &[Vec<f64>]| -> Vec<[f64; 2]> {
        if dim == 1 {
            axes[0].iter().map(|&v| [v, 0.0]).collect()
        } else {
            axes[0].iter().flat_map(|&u| axes[1].iter().map(move |&v| [u, v])).collect()
        }
    };
    let xpts = tensor(&xs);
    let kpts = tensor(&ks);
    let hx = grid.spacing(0);
    let hk = 2.0 * std::f64::consts::PI / grid.box_length(0);
    let indices = multi_indices(dim, max_order);
    // Precompute factor jets for separable symbols.
    let xjets: Vec<Vec<Jet>> = xpts.iter().map(|p| a.terms.iter().map(|t| t.x.taylor(*p)).collect()).collect();
    let kjets: Vec<Vec<Jet>> = kpts.iter().map(|p| a.terms.iter().map(|t| t.xi.taylor(*p)).collect()).collect();
    let mut out = Vec::new();
    for alpha in &indices {
        for beta in &indices {
            let (ka, kb) = (alpha.order() as f64, beta.order() as f64);
            let sup = xpts
                .par_iter()
                .enumerate()
                .map(|(ix, x)| {
                    let wx = bracket_arg(a, x).powf(a.q - ka);
                    let mut best: f64 = 0.0;
                    for (ik, xi) in kpts.iter().enumerate() {
                        let wk = (1.0 + xi[0] * xi[0] + xi[1] * xi[1]).sqrt().powf(a.m - kb);
                        let mut d: Complex64 = a
                            .terms
                            .iter()
                            .enumerate()
                            .map(|(t, term)| {
                                term.coeff
                                    * xjets[ix][t].derivative(alpha.as_usize())
                                    * kjets[ik][t].derivative(beta.as_usize())
                            })
                            .sum();
                        if let Some(g) = &a.general {
                            d += centered_difference(g, x, xi, alpha, beta, hx, hk);
                        }
                        best = best.max(d.norm() / (wx * wk));
                    }
                    best
                })
                .reduce(|| 0.0, f64::max);
            out.push((*alpha, *beta, sup));
        }
    }
    out
}

fn bracket_arg(a: &Symbol, x: &[f64; 2]) -> f64 {
    let s = a.sigma[0] * x[0] + a.sigma[1] * x[1] + a.omega;
    (1.0 + s * s).sqrt()
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Centered difference `Δ^k` weights and offsets (in units of `h`).
fn stencil(k: u32) -> Vec<(f64, f64)> {
    (0..=k)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            (sign * binomial(k, i), 0.5 * k as f64 - i as f64)
        })
        .collect()
}

fn centered_difference(
    g: &GeneralFn,
    x: &[f64; 2],
    xi: &[f64; 2],
    alpha: &MultiIndex,
    beta: &MultiIndex,
    hx: f64,
    hk: f64,
) -> Complex64 {
    let sx0 = stencil(alpha.0[0]);
    let sx1 = stencil(alpha.0[1]);
    let sk0 = stencil(beta.0[0]);
    let sk1 = stencil(beta.0[1]);
    let mut acc = Complex64::new(0.0, 0.0);
    for (w0, o0) in &sx0 {
        for (w1, o1) in &sx1 {
            for (v0, p0) in &sk0 {
                for (v1, p1) in &sk1 {
                    let xx = [x[0] + o0 * hx, x[1] + o1 * hx];
                    let kk = [xi[0] + p0 * hk, xi[1] + p1 * hk];
                    acc += w0 * w1 * v0 * v1 * g(&xx, &kk);
                }
            }
        }
    }
    acc / (hx.powi(alpha.order() as i32) * hk.powi(beta.order() as i32))
}

// ---------------------------------------------------------------------------
// Composition

/// Truncated composition symbol
/// `c_N = Σ_{|β|<N} (-i)^{|β|} / β! ∂ξ^β a ∂x^β b` (angular frequencies).
pub fn compose_expansion(a: &Symbol, b: &Symbol, n_terms: usize) -> Result<Symbol> {
    if !(1..=4).contains(&n_terms) {
        return Err(invalid(format!("composition order N = {n_terms} outside 1..=4")));
    }
    if !a.is_separable() || !b.is_separable() {
        return Err(invalid("composition needs separable symbols"));
    }
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, got: b.dim });
    }
    let mut terms = Vec::new();
    for k in 0..n_terms as u32 {
        let phase = Complex64::new(0.0, -1.0).powu(k);
        for beta in MultiIndex::of_order(a.dim, k) {
            let c = phase / beta.factorial();
            let bu = beta.as_usize();
            for ta in &a.terms {
                if k > 0 && ta.xi.is_one() {
                    continue;
                }
                for tb in &b.terms {
                    if k > 0 && tb.x.is_one() {
                        continue;
                    }
                    terms.push(Term {
                        coeff: c * ta.coeff * tb.coeff,
                        x: ta.x.times(&tb.x.derivative(bu)),
                        xi: ta.xi.derivative(bu).times(&tb.xi),
                    });
                }
            }
        }
    }
    let (sigma, omega) = if a.q != 0.0 { (a.sigma, a.omega) } else { (b.sigma, b.omega) };
    Ok(Symbol::from_terms(
        format!("({}) # ({}) N={n_terms}", a.label, b.label),
        a.dim,
        (a.m + b.m, a.q + b.q),
        sigma,
        omega,
        terms,
    ))
}

/// `max_f ‖Ψ_a Ψ_b f - Ψ_{c_N} f‖ / ‖f‖` over an ensemble.
pub fn composition_remainder(a: &Symbol, b: &Symbol, n_terms: usize, ensemble: &[Field]) -> Result<f64> {
    let grid = ensemble.first().ok_or_else(|| invalid("empty ensemble"))?.grid().clone();
    let oa = a.operator(&grid)?;
    let ob = b.operator(&grid)?;
    let oc = compose_expansion(a, b, n_terms)?.operator(&grid)?;
    let ratios: Result<Vec<f64>> = ensemble
        .par_iter()
        .map(|f| {
            let cf = ComplexField::from(f);
            let lhs = oa.apply(&ob.apply(&cf)?)?;
            let rhs = oc.apply(&cf)?;
            Ok(lhs.sub(&rhs).norm() / f.norm())
        })
        .collect();
    Ok(ratios?.into_iter().fold(0.0, f64::max))
}

/// Remainders for `N = 1..=n_max` and the slope of `log r(N)` against `N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RemainderCurve {
    pub n: Vec<usize>,
    pub remainder: Vec<f64>,
    pub log_slope: f64,
}

impl RemainderCurve {
    pub fn strictly_decreasing(&self) -> bool {
        self.remainder.windows(2).all(|w| w[1] < w[0])
    }
}

pub fn remainder_curve(a: &Symbol, b: &Symbol, n_max: usize, ensemble: &[Field]) -> Result<RemainderCurve> {
    let n: Vec<usize> = (1..=n_max).collect();
    let remainder = n.iter().map(|&k| composition_remainder(a, b, k, ensemble)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = n.iter().map(|&k| k as f64).collect();
    let ys: Vec<f64> = remainder.iter().map(|r| r.max(1e-300).ln()).collect();
    let (log_slope, _) = crate::quadrature::linear_fit(&xs, &ys);
    Ok(RemainderCurve { n, remainder, log_slope })
}

// ---------------------------------------------------------------------------
// Commutator factorization

/// One correction `Ψ_{a_β}(∂^β g ·)` of the commutator expansion.
#[derive(Clone, Debug)]
pub struct Correction {
    pub beta: MultiIndex,
    pub symbol: Symbol,
    pub g_derivative: Factor,
}

/// `g Ψ_a f = Ψ_a(g f) + Σ_{1<=|β|<=N} Ψ_{a_β}(∂^β g f) + K_N f` with
/// `a_β = i^{|β|} / β! ∂ξ^β a`, exact for polynomial `g` of degree `<= N`.
#[derive(Clone, Debug)]
pub struct Factorization {
    pub g: Factor,
    pub a: Symbol,
    pub n_terms: usize,
    pub corrections: Vec<Correction>,
}

pub fn commutator_factorize(g: &Factor, a: &Symbol, n_terms: usize) -> Result<Factorization> {
    if !a.is_separable() {
        return Err(invalid("commutator expansion needs a separable symbol"));
    }
    if n_terms > 4 {
        return Err(invalid(format!("commutator order N = {n_terms} above 4")));
    }
    let mut corrections = Vec::new();
    for k in 1..=n_terms as u32 {
        let phase = Complex64::new(0.0, 1.0).powu(k);
        for beta in MultiIndex::of_order(a.dim, k) {
            let bu = beta.as_usize();
            let terms = a
                .terms
                .iter()
                .filter(|t| !t.xi.is_one())
                .map(|t| Term { coeff: t.coeff * phase / beta.factorial(), x: t.x.clone(), xi: t.xi.derivative(bu) })
                .collect();
            let symbol = Symbol::from_terms(
                format!("a_{beta}"),
                a.dim,
                (a.m - k as f64, a.q),
                a.sigma,
                a.omega,
                terms,
            );
            corrections.push(Correction { beta, symbol, g_derivative: g.derivative(bu) });
        }
    }
    Ok(Factorization { g: g.clone(), a: a.clone(), n_terms, corrections })
}

impl Factorization {
    fn sample(&self, grid: &Arc<Grid>, f: &Factor) -> Vec<f64> {
        (0..grid.len()).map(|i| f.value(grid.point(i))).collect()
    }

    /// The correction fields `Ψ_{a_β}(∂^β g f)`.
    pub fn correction_fields(&self, f: &Field) -> Result<Vec<ComplexField>> {
        let grid = f.grid();
        self.corrections
            .iter()
            .map(|c| {
                let dg = self.sample(grid, &c.g_derivative);
                c.symbol.operator(grid)?.apply_real(&f.mul_samples(&dg))
            })
            .collect()
    }

    /// `K_N f`.
    pub fn remainder(&self, f: &Field) -> Result<ComplexField> {
        let grid = f.grid();
        let gs = self.sample(grid, &self.g);
        let op = self.a.operator(grid)?;
        let mut k = op.apply_real(f)?.mul_samples(&gs).sub(&op.apply_real(&f.mul_samples(&gs))?);
        for c in self.correction_fields(f)? {
            k = k.sub(&c);
        }
        Ok(k)
    }

    /// `max_f ‖K_N f‖ / ‖f‖` over an ensemble.
    pub fn remainder_bound(&self, ensemble: &[Field]) -> Result<f64> {
        let r: Result<Vec<f64>> =
            ensemble.par_iter().map(|f| Ok(self.remainder(f)?.norm() / f.norm())).collect();
        Ok(r?.into_iter().fold(0.0, f64::max))
    }
}

/// `max_f ‖g Ψ_a f‖ / ‖f‖`, used with separated supports of `g` and `f`.
pub fn localized_operator_bound(g: &Factor, a: &Symbol, ensemble: &[Field]) -> Result<f64> {
    let grid = ensemble.first().ok_or_else(|| invalid("empty ensemble"))?.grid().clone();
    let gs: Vec<f64> = (0..grid.len()).map(|i| g.value(grid.point(i))).collect();
    let op = a.operator(&grid)?;
    let r: Result<Vec<f64>> =
        ensemble.par_iter().map(|f| Ok(op.apply_real(f)?.mul_samples(&gs).norm() / f.norm())).collect();
    Ok(r?.into_iter().fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Interpolation and continuity

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpolationSample {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub additive_lhs: f64,
    pub additive_rhs: f64,
    pub additive_ratio: f64,
}

/// Both interpolation inequalities for one `f`:
/// `‖⟨σ·x+ω⟩^{θb} J^{(1-θ)a} f‖ <= C ‖⟨σ·x+ω⟩^b f‖^θ ‖J^a f‖^{1-θ}` and
/// `‖J^{(1-θ)a}(⟨σ·x+ω⟩^{θb} f)‖ <= C (‖⟨σ·x+ω⟩^b f‖ + ‖J^a f‖)`.
pub fn interpolation_check(
    f: &Field,
    theta: f64,
    a: f64,
    b: f64,
    sigma: [f64; 2],
    omega: f64,
) -> Result<InterpolationSample> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("theta = {theta} outside [0, 1]")));
    }
    if a < 0.0 || b < 0.0 {
        return Err(invalid("interpolation exponents must be nonnegative"));
    }
    let weight = |p: f64| -> Vec<f64> {
        let g = f.grid();
        (0..g.len())
            .map(|i| {
                let x = g.point(i);
                let s = sigma[0] * x[0] + sigma[1] * x[1] + omega;
                (1.0 + s * s).powf(0.5 * p)
            })
            .collect()
    };
    let w_tb = weight(theta * b);
    let w_b = weight(b);
    let lhs = apply_bessel(f, (1.0 - theta) * a).mul_samples(&w_tb).norm();
    let nb = f.mul_samples(&w_b).norm();
    let na = apply_bessel(f, a).norm();
    let rhs = nb.powf(theta) * na.powf(1.0 - theta);
    let additive_lhs = apply_bessel(&f.mul_samples(&w_tb), (1.0 - theta) * a).norm();
    let additive_rhs = nb + na;
    Ok(InterpolationSample {
        lhs,
        rhs,
        ratio: lhs / rhs,
        additive_lhs,
        additive_rhs,
        additive_ratio: additive_lhs / additive_rhs,
    })
}

/// `(‖J^{(1-θ)a} f‖, ‖J^a f‖^{1-θ} ‖f‖^θ)`, the unweighted endpoint where the
/// inequality holds with constant 1.
pub fn sobolev_log_convexity(f: &Field, theta: f64, a: f64) -> (f64, f64) {
    let lhs = apply_bessel(f, (1.0 - theta) * a).norm();
    let rhs = apply_bessel(f, a).norm().powf(1.0 - theta) * f.norm().powf(theta);
    (lhs, rhs)
}

/// Constant fitted on one ensemble and checked on another.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InterpolationFit {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub fitted_constant: f64,
    pub fitted_additive_constant: f64,
    pub held_out_max_ratio: f64,
    pub held_out_max_additive_ratio: f64,
    /// Held-out samples exceeding `slack × fitted constant`.
    pub violations: usize,
    pub slack: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn fit_interpolation(
    fit_set: &[Field],
    held_out: &[Field],
    theta: f64,
    a: f64,
    b: f64,
    sigma: [f64; 2],
    omega: f64,
    slack: f64,
) -> Result<InterpolationFit> {
    let run = |set: &[Field]| -> Result<Vec<InterpolationSample>> {
        set.par_iter().map(|f| interpolation_check(f, theta, a, b, sigma, omega)).collect()
    };
    let fit = run(fit_set)?;
    let held = run(held_out)?;
    let max = |v: &[InterpolationSample], pick: fn(&InterpolationSample) -> f64| {
        v.iter().map(pick).fold(0.0, f64::max)
    };
    let c = max(&fit, |s| s.ratio);
    let ca = max(&fit, |s| s.additive_ratio);
    let violations =
        held.iter().filter(|s| s.ratio > slack * c || s.additive_ratio > slack * ca).count();
    Ok(InterpolationFit {
        theta,
        a,
        b,
        fitted_constant: c,
        fitted_additive_constant: ca,
        held_out_max_ratio: max(&held, |s| s.ratio),
        held_out_max_additive_ratio: max(&held, |s| s.additive_ratio),
        violations,
        slack,
    })
}

/// `max_f ‖Ψ_a f‖ / ‖⟨σ·x+ω⟩^q J^m f‖` over an ensemble.
pub fn continuity_ratio(a: &Symbol, ensemble: &[Field]) -> Result<f64> {
    let grid = ensemble.first().ok_or_else(|| invalid("empty ensemble"))?.grid().clone();
    let op = a.operator(&grid)?;
    let w: Vec<f64> = (0..grid.len())
        .map(|i| bracket_arg(a, &grid.point(i)).powf(a.q))
        .collect();
    let r: Result<Vec<f64>> = ensemble
        .par_iter()
        .map(|f| {
            let num = op.apply_real(f)?.norm();
            let den = apply_bessel(f, a.m).mul_samples(&w).norm();
            Ok(num / den)
        })
        .collect();
    Ok(r?.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gaussian_ensemble, EnsembleSpec};

    fn ensemble(n: usize, l: f64, count: usize, seed: u64) -> Vec<Field> {
        let g = make_grid(1, l, n).unwrap();
        gaussian_ensemble(&g, &EnsembleSpec { count, ..EnsembleSpec::standard() }, seed)
    }

    #[test]
    fn identity_symbol_is_identity() {
        let ens = ensemble(32, 20.0, 3, 1);
        for f in &ens {
            let r = quantize_apply(&Symbol::identity(1), f).unwrap();
            assert!(r.sub(&ComplexField::from(f)).norm() < 1e-14);
        }
    }

    #[test]
    fn bessel_symbol_matches_multiplier() {
        let ens = ensemble(64, 20.0, 3, 2);
        for f in &ens {
            let r = quantize_apply(&Symbol::bessel(1, 1.7), f).unwrap();
            let j = apply_bessel(f, 1.7);
            assert!(r.real().sub(&j).unwrap().max_abs() < 1e-10);
            assert!(r.imag_norm() < 1e-12);
        }
    }

    #[test]
    fn polynomial_symbol_commutator_is_exact() {
        // a = ξ², g smooth periodic: the expansion terminates at N = 2
        let g = make_grid(1, 2.0 * std::f64::consts::PI, 64).unwrap();
        let f = Field::from_fn(g.clone(), |x| (x[0].sin() + 0.3 * (2.0 * x[0]).cos()).exp());
        let a = Symbol::from_terms(
            "xi^2",
            1,
            (2.0, 0.0),
            [1.0, 0.0],
            0.0,
            vec![term(Factor::One, Factor::analytic("xi^2", |k| k[0] * k[0]))],
        );
        // cos composed through its Taylor series
        let gf = Factor::analytic("cos", |x| {
            let v = x[0].value();
            let mut s = [0.0; crate::jet::ORDER + 1];
            for (k, c) in s.iter_mut().enumerate() {
                let d = match k % 4 {
                    0 => v.cos(),
                    1 => -v.sin(),
                    2 => -v.cos(),
                    _ => v.sin(),
                };
                *c = d / crate::jet::factorial(k);
            }
            x[0].compose(&s)
        });
        let fac = commutator_factorize(&gf, &a, 2).unwrap();
        assert!(fac.remainder(&f).unwrap().norm() < 1e-10);
        let fac1 = commutator_factorize(&gf, &a, 1).unwrap();
        assert!(fac1.remainder(&f).unwrap().norm() > 1e-3);
    }
}
