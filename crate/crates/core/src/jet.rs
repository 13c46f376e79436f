//! Truncated Taylor polynomials in up to two variables.
//!
//! A [`Jet`] stores the coefficients `c[i][j]` of `h1^i h2^j` for
//! `i + j <= ORDER`. Arithmetic on jets propagates exact derivatives, so
//! every weight and symbol built from them has analytic partial derivatives
//! up to order [`ORDER`] without finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest total derivative order carried by a jet.
pub const ORDER: usize = 6;
const W: usize = ORDER + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [[f64; W]; W],
}

/// Taylor coefficients `g^(k)(a) / k!` of a univariate function at a point.
pub type Series = [f64; W];

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [[0.0; W]; W];
        c[0][0] = v;
        Jet { c }
    }

    /// The coordinate function `x_axis` expanded at `v`.
    pub fn var(v: f64, axis: usize) -> Self {
        assert!(axis < 2, "jets carry at most two variables");
        let mut j = Jet::constant(v);
        if axis == 0 {
            j.c[1][0] = 1.0;
        } else {
            j.c[0][1] = 1.0;
        }
        j
    }

    /// Coordinate jets for a point in one or two dimensions.
    pub fn point(p: &[f64]) -> [Jet; 2] {
        let x0 = Jet::var(p[0], 0);
        let x1 = if p.len() > 1 {
            Jet::var(p[1], 1)
        } else {
            Jet::constant(0.0)
        };
        [x0, x1]
    }

    pub fn value(&self) -> f64 {
        self.c[0][0]
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i + j > ORDER {
            0.0
        } else {
            self.c[i][j]
        }
    }

    /// Partial derivative `∂^α` at the expansion point.
    pub fn derivative(&self, alpha: [usize; 2]) -> f64 {
        let [i, j] = alpha;
        if i + j > ORDER {
            panic!("derivative order {} exceeds jet order {ORDER}", i + j);
        }
        self.c[i][j] * factorial(i) * factorial(j)
    }

    /// Jet of `∂^α self`; coefficients beyond `ORDER - |α|` are lost.
    pub fn differentiate(&self, alpha: [usize; 2]) -> Jet {
        let [a, b] = alpha;
        let mut out = Jet::constant(0.0);
        for i in 0..W {
            for j in 0..W - i {
                let (si, sj) = (i + a, j + b);
                if si + sj > ORDER {
                    continue;
                }
                out.c[i][j] = self.c[si][sj] * falling(si, a) * falling(sj, b);
            }
        }
        out
    }

    /// Primitive in the first variable with constant term `value`.
    pub fn integrate0(&self, value: f64) -> Jet {
        let mut out = Jet::constant(value);
        for i in 0..ORDER {
            for j in 0..W - i - 1 {
                out.c[i + 1][j] = self.c[i][j] / (i + 1) as f64;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = *self;
        for row in out.c.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        out
    }

    /// `g(self)` for a univariate `g` given by its series at `self.value()`.
    pub fn compose(&self, series: &Series) -> Jet {
        let mut delta = *self;
        delta.c[0][0] = 0.0;
        let mut acc = Jet::constant(series[ORDER]);
        for k in (0..ORDER).rev() {
            acc = acc * delta;
            acc.c[0][0] += series[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut s = [0.0; W];
        for (k, v) in s.iter_mut().enumerate() {
            *v = e / factorial(k);
        }
        self.compose(&s)
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut s = [0.0; W];
        s[0] = a.ln();
        for (k, v) in s.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *v = sign / (k as f64 * a.powi(k as i32));
        }
        self.compose(&s)
    }

    pub fn powf(&self, r: f64) -> Jet {
        let a = self.value();
        let mut s = [0.0; W];
        let mut binom = 1.0;
        for (k, v) in s.iter_mut().enumerate() {
            if k > 0 {
                binom *= (r - (k - 1) as f64) / k as f64;
            }
            *v = binom * a.powf(r - k as f64);
        }
        self.compose(&s)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    /// `⟨self⟩ = (1 + self²)^{1/2}`.
    pub fn bracket(&self) -> Jet {
        (*self * *self + 1.0).sqrt()
    }

    /// Univariate series (first variable) of this jet.
    pub fn series0(&self) -> Series {
        let mut s = [0.0; W];
        for (k, v) in s.iter_mut().enumerate() {
            *v = self.c[k][0];
        }
        s
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// n (n-1) ... (n-k+1)
fn falling(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for i in 0..W {
            for j in 0..W - i {
                self.c[i][j] += rhs.c[i][j];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for i in 0..W {
            for j in 0..W - i {
                self.c[i][j] -= rhs.c[i][j];
            }
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::constant(0.0);
        for i in 0..W {
            for j in 0..W - i {
                let a = self.c[i][j];
                if a == 0.0 {
                    continue;
                }
                for p in 0..W - i - j {
                    for q in 0..W - i - j - p {
                        out.c[i + p][j + q] += a * rhs.c[p][q];
                    }
                }
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0][0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.c[0][0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_derivatives() {
        // f(x, y) = x^3 y^2 at (2, 3)
        let [x, y] = Jet::point(&[2.0, 3.0]);
        let f = x * x * x * y * y;
        assert_eq!(f.value(), 72.0);
        assert_eq!(f.derivative([1, 0]), 3.0 * 4.0 * 9.0);
        assert_eq!(f.derivative([2, 1]), 6.0 * 2.0 * 2.0 * 3.0);
        assert_eq!(f.derivative([3, 2]), 12.0);
        assert_eq!(f.derivative([4, 0]), 0.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::var(0.7, 0);
        let e = x.exp();
        for k in 0..=ORDER {
            assert!((e.derivative([k, 0]) - 0.7f64.exp()).abs() < 1e-13);
        }
        let l = x.ln();
        assert!((l.derivative([3, 0]) - 2.0 / 0.7f64.powi(3)).abs() < 1e-11);
        let p = x.powf(2.5);
        assert!((p.derivative([2, 0]) - 2.5 * 1.5 * 0.7f64.powf(0.5)).abs() < 1e-12);
        let b = x.bracket();
        let exact = 1.0 / (1.0 + 0.49f64).powf(1.5);
        assert!((b.derivative([2, 0]) - exact).abs() < 1e-13);
    }

    #[test]
    fn mixed_partials_of_radial_bracket() {
        // ∂x∂y ⟨(x,y)⟩ = -xy / ⟨·⟩^3
        let [x, y] = Jet::point(&[0.3, -1.2]);
        let r = (x * x + y * y + 1.0).sqrt();
        let n = (1.0f64 + 0.09 + 1.44).sqrt();
        assert!((r.derivative([1, 1]) - 0.36 / n.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn differentiate_shifts_coefficients() {
        let x = Jet::var(0.4, 0);
        let s = (x * 2.0).exp();
        let d = s.differentiate([1, 0]);
        assert!((d.value() - 2.0 * 0.8f64.exp()).abs() < 1e-13);
        assert!((d.derivative([2, 0]) - 8.0 * 0.8f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn integrate_inverts_differentiate() {
        let x = Jet::var(1.3, 0);
        let f = x.powf(1.7);
        let back = f.differentiate([1, 0]).integrate0(f.value());
        for k in 0..ORDER {
            assert!((back.coeff(k, 0) - f.coeff(k, 0)).abs() < 1e-12);
        }
    }
}
