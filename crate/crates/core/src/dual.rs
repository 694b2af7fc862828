//! Hyper-dual numbers for exact first and second derivatives of user
//! densities.
//!
//! A hyper-dual number `a + b ε₁ + c ε₂ + d ε₁ε₂` with `ε₁² = ε₂² = 0`
//! carries `f`, `∂f/∂u`, `∂f/∂w` and `∂²f/∂u∂w` through any expression
//! written against the [`Scalar`] trait.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Arithmetic needed to write a Lagrangian density once and evaluate it on
/// plain floats or on hyper-dual numbers.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(value: f64) -> Self;
    fn re(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn tanh(self) -> Self;
    fn atan(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn zero() -> Self {
        Self::cst(0.0)
    }
}

impl Scalar for f64 {
    fn cst(value: f64) -> Self {
        value
    }
    fn re(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn atan(self) -> Self {
        f64::atan(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub const fn new(re: f64, e1: f64, e2: f64, e12: f64) -> Self {
        Self { re, e1, e2, e12 }
    }

    /// Seeds a variable: `e1`/`e2` select whether it moves along the first
    /// and second infinitesimal directions.
    pub fn var(re: f64, e1: bool, e2: bool) -> Self {
        Self::new(re, f64::from(u8::from(e1)), f64::from(u8::from(e2)), 0.0)
    }

    /// Applies a scalar function given its value and first two derivatives.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.re;
        let recip = o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
        self * recip
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl Add<f64> for HyperDual {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self { re: self.re + o, ..self }
    }
}

impl Sub<f64> for HyperDual {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self { re: self.re - o, ..self }
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self::new(self.re * o, self.e1 * o, self.e2 * o, self.e12 * o)
    }
}

impl Div<f64> for HyperDual {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Self::new(self.re / o, self.e1 / o, self.e2 / o, self.e12 / o)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for HyperDual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for HyperDual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Scalar for HyperDual {
    fn cst(value: f64) -> Self {
        Self::new(value, 0.0, 0.0, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s, -c)
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let inv = 1.0 / self.re;
        self.chain(self.re.ln(), inv, -inv * inv)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.re))
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }
    fn atan(self) -> Self {
        let d = 1.0 / (1.0 + self.re * self.re);
        self.chain(self.re.atan(), d, -2.0 * self.re * d * d)
    }
    fn powi(self, n: i32) -> Self {
        let nf = f64::from(n);
        let f = self.re.powi(n);
        let df = if n == 0 { 0.0 } else { nf * self.re.powi(n - 1) };
        let d2f = if n == 0 || n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * self.re.powi(n - 2)
        };
        self.chain(f, df, d2f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed(f: impl Fn(HyperDual, HyperDual) -> HyperDual, u: f64, w: f64) -> HyperDual {
        f(HyperDual::var(u, true, false), HyperDual::var(w, false, true))
    }

    #[test]
    fn product_rule_and_mixed_partial() {
        // f = u² w³ → f_u = 2uw³, f_w = 3u²w², f_uw = 6uw²
        let r = mixed(|u, w| u * u * w.powi(3), 1.5, -0.5);
        assert!((r.re - 1.5f64.powi(2) * (-0.125)).abs() < 1e-15);
        assert!((r.e1 - 2.0 * 1.5 * (-0.125)).abs() < 1e-15);
        assert!((r.e2 - 3.0 * 2.25 * 0.25).abs() < 1e-15);
        assert!((r.e12 - 6.0 * 1.5 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn elementary_second_derivatives_match_closed_forms() {
        let x = 0.7;
        let d = |f: fn(HyperDual) -> HyperDual| f(HyperDual::var(x, true, true));
        let s = d(Scalar::sin);
        assert!((s.e12 + x.sin()).abs() < 1e-15);
        let c = d(Scalar::cos);
        assert!((c.e12 + x.cos()).abs() < 1e-15);
        let a = d(Scalar::atan);
        assert!((a.e1 - 1.0 / (1.0 + x * x)).abs() < 1e-15);
        assert!((a.e12 + 2.0 * x / (1.0 + x * x).powi(2)).abs() < 1e-15);
        let q = d(Scalar::sqrt);
        assert!((q.e12 + 0.25 * x.powf(-1.5)).abs() < 1e-14);
        let l = d(|v| v.ln());
        assert!((l.e12 + 1.0 / (x * x)).abs() < 1e-14);
        let t = d(Scalar::tanh);
        let sech2 = 1.0 / x.cosh().powi(2);
        assert!((t.e1 - sech2).abs() < 1e-15);
        assert!((t.e12 + 2.0 * x.tanh() * sech2).abs() < 1e-15);
    }

    #[test]
    fn quotient_matches_finite_difference() {
        let f = |u: f64| (u * u + 1.0) / (u - 3.0);
        let r = {
            let u = HyperDual::var(0.4, true, true);
            (u * u + 1.0) / (u - 3.0)
        };
        let h = 1e-4;
        let fd2 = (f(0.4 + h) - 2.0 * f(0.4) + f(0.4 - h)) / (h * h);
        assert!((r.e12 - fd2).abs() < 1e-6);
    }
}
