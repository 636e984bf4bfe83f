//! Truncated Taylor series ("jets") in one complex variable, and the
//! [`Scalar`] abstraction that lets metric expressions be evaluated either on
//! plain complex numbers or on jets.
//!
//! A `Jet<N>` stores at most `N` coefficients. Its `deg` marks the highest
//! coefficient that is meaningful; every coefficient above `deg` is zero.
//! Arithmetic keeps coefficients `0..=deg` exact, which is all the Taylor
//! integrator needs when it builds solutions one order at a time.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Field-like numeric type that expression trees can be evaluated over.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: Complex64) -> Self;
    /// Constant term.
    fn value(&self) -> Complex64;
    fn scale(&self, c: Complex64) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn is_finite(&self) -> bool;

    fn zero() -> Self {
        Self::constant(Complex64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }
}

impl Scalar for Complex64 {
    fn constant(c: Complex64) -> Self {
        c
    }
    fn value(&self) -> Complex64 {
        *self
    }
    fn scale(&self, c: Complex64) -> Self {
        self * c
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        Complex64::sqrt(*self)
    }
    fn sinh(&self) -> Self {
        Complex64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        Complex64::cosh(*self)
    }
    fn powi(&self, n: i32) -> Self {
        Complex64::powi(self, n)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<const N: usize> {
    c: [Complex64; N],
    deg: usize,
}

impl<const N: usize> Jet<N> {
    pub const CAPACITY: usize = N;

    pub fn constant(c: Complex64) -> Self {
        let mut out = Self { c: [ZERO; N], deg: 0 };
        out.c[0] = c;
        out
    }

    /// The jet of `c0 + c1·s`.
    pub fn variable(c0: Complex64, c1: Complex64) -> Self {
        let mut out = Self::constant(c0);
        if N > 1 {
            out.c[1] = c1;
            out.deg = 1;
        }
        out
    }

    /// Builds a jet from the given coefficients; its degree is `coeffs.len() - 1`.
    pub fn from_coeffs(coeffs: &[Complex64]) -> Self {
        assert!(!coeffs.is_empty() && coeffs.len() <= N, "jet capacity exceeded");
        let mut out = Self { c: [ZERO; N], deg: coeffs.len() - 1 };
        out.c[..coeffs.len()].copy_from_slice(coeffs);
        out
    }

    pub fn coeff(&self, k: usize) -> Complex64 {
        if k <= self.deg {
            self.c[k]
        } else {
            ZERO
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.c[..=self.deg]
    }

    pub fn deg(&self) -> usize {
        self.deg
    }

    /// Sets coefficient `k`, raising the degree if needed.
    pub fn set_coeff(&mut self, k: usize, v: Complex64) {
        self.c[k] = v;
        self.deg = self.deg.max(k);
    }

    /// Horner evaluation of the truncated series at `s`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.c[..=self.deg].iter().rev().fold(ZERO, |acc, &c| acc * s + c)
    }

    fn zeroed(deg: usize) -> Self {
        Self { c: [ZERO; N], deg }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let deg = self.deg.max(rhs.deg);
        let mut out = Self::zeroed(deg);
        for k in 0..=deg {
            out.c[k] = self.c[k] + rhs.c[k];
        }
        out
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let deg = self.deg.max(rhs.deg);
        let mut out = Self::zeroed(deg);
        for k in 0..=deg {
            out.c[k] = self.c[k] - rhs.c[k];
        }
        out
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut out = self;
        for k in 0..=self.deg {
            out.c[k] = -self.c[k];
        }
        out
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        // Constant operands are common (metric coefficients); skip the convolution.
        if rhs.deg == 0 {
            return self.scale(rhs.c[0]);
        }
        if self.deg == 0 {
            return rhs.scale(self.c[0]);
        }
        let deg = self.deg.max(rhs.deg);
        let mut out = Self::zeroed(deg);
        for k in 0..=deg {
            let lo = k.saturating_sub(rhs.deg);
            let hi = k.min(self.deg);
            let mut acc = ZERO;
            for j in lo..=hi {
                acc += self.c[j] * rhs.c[k - j];
            }
            out.c[k] = acc;
        }
        out
    }
}

impl<const N: usize> Div for Jet<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        if rhs.deg == 0 {
            return self.scale(rhs.c[0].inv());
        }
        let deg = self.deg.max(rhs.deg);
        let b0inv = rhs.c[0].inv();
        let mut out = Self::zeroed(deg);
        for k in 0..=deg {
            let mut acc = self.c[k];
            for j in 1..=k.min(rhs.deg) {
                acc -= rhs.c[j] * out.c[k - j];
            }
            out.c[k] = acc * b0inv;
        }
        out
    }
}

impl<const N: usize> Jet<N> {
    fn sin_cos(&self) -> (Self, Self) {
        let mut s = Self::zeroed(self.deg);
        let mut c = Self::zeroed(self.deg);
        s.c[0] = self.c[0].sin();
        c.c[0] = self.c[0].cos();
        for k in 1..=self.deg {
            let mut sa = ZERO;
            let mut ca = ZERO;
            for j in 1..=k {
                let ja = self.c[j] * j as f64;
                sa += ja * c.c[k - j];
                ca += ja * s.c[k - j];
            }
            s.c[k] = sa / k as f64;
            c.c[k] = -ca / k as f64;
        }
        (s, c)
    }

    fn sinh_cosh(&self) -> (Self, Self) {
        let mut s = Self::zeroed(self.deg);
        let mut c = Self::zeroed(self.deg);
        s.c[0] = self.c[0].sinh();
        c.c[0] = self.c[0].cosh();
        for k in 1..=self.deg {
            let mut sa = ZERO;
            let mut ca = ZERO;
            for j in 1..=k {
                let ja = self.c[j] * j as f64;
                sa += ja * c.c[k - j];
                ca += ja * s.c[k - j];
            }
            s.c[k] = sa / k as f64;
            c.c[k] = ca / k as f64;
        }
        (s, c)
    }
}

impl<const N: usize> Scalar for Jet<N> {
    fn constant(c: Complex64) -> Self {
        Jet::constant(c)
    }

    fn value(&self) -> Complex64 {
        self.c[0]
    }

    fn scale(&self, a: Complex64) -> Self {
        let mut out = *self;
        for k in 0..=self.deg {
            out.c[k] *= a;
        }
        out
    }

    fn sin(&self) -> Self {
        self.sin_cos().0
    }

    fn cos(&self) -> Self {
        self.sin_cos().1
    }

    fn exp(&self) -> Self {
        let mut e = Self::zeroed(self.deg);
        e.c[0] = self.c[0].exp();
        for k in 1..=self.deg {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += self.c[j] * (j as f64) * e.c[k - j];
            }
            e.c[k] = acc / k as f64;
        }
        e
    }

    fn ln(&self) -> Self {
        let mut l = Self::zeroed(self.deg);
        l.c[0] = self.c[0].ln();
        let a0inv = self.c[0].inv();
        for k in 1..=self.deg {
            let mut acc = ZERO;
            for j in 1..k {
                acc += l.c[j] * (j as f64) * self.c[k - j];
            }
            l.c[k] = (self.c[k] - acc / k as f64) * a0inv;
        }
        l
    }

    fn sqrt(&self) -> Self {
        let mut r = Self::zeroed(self.deg);
        r.c[0] = self.c[0].sqrt();
        let denom = (r.c[0] * 2.0).inv();
        for k in 1..=self.deg {
            let mut acc = ZERO;
            for j in 1..k {
                acc += r.c[j] * r.c[k - j];
            }
            r.c[k] = (self.c[k] - acc) * denom;
        }
        r
    }

    fn sinh(&self) -> Self {
        self.sinh_cosh().0
    }

    fn cosh(&self) -> Self {
        self.sinh_cosh().1
    }

    fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut result = Self::one();
        let mut base = *self;
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        result
    }

    fn is_finite(&self) -> bool {
        self.c[..=self.deg].iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type J = Jet<12>;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn factorial(k: usize) -> f64 {
        (1..=k).map(|i| i as f64).product()
    }

    #[test]
    fn exp_of_variable_has_reciprocal_factorials() {
        let x = J::from_coeffs(&[c(0.0), c(1.0), c(0.0), c(0.0), c(0.0), c(0.0)]);
        let e = x.exp();
        for k in 0..=5 {
            assert_relative_eq!(e.coeff(k).re, 1.0 / factorial(k), epsilon = 1e-15);
        }
    }

    #[test]
    fn sin_cos_match_series_and_pythagoras() {
        let x = J::from_coeffs(&[c(0.3), c(1.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0)]);
        let s = x.sin();
        let co = x.cos();
        let one = s * s + co * co;
        assert_relative_eq!(one.coeff(0).re, 1.0, epsilon = 1e-15);
        for k in 1..=6 {
            assert!(one.coeff(k).norm() < 1e-14);
        }
        // d^k/ds^k sin(0.3 + s) at 0 = sin(0.3 + kπ/2)
        for k in 0..=6 {
            let expected = (0.3 + k as f64 * std::f64::consts::FRAC_PI_2).sin() / factorial(k);
            assert_relative_eq!(s.coeff(k).re, expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = J::from_coeffs(&[c(2.0), c(-1.0), c(0.5), c(0.25)]);
        let b = J::from_coeffs(&[c(1.5), Complex64::new(0.3, 0.7), c(0.1), c(0.0)]);
        let q = (a * b) / b;
        for k in 0..=3 {
            assert!((q.coeff(k) - a.coeff(k)).norm() < 1e-14);
        }
    }

    #[test]
    fn sqrt_and_ln_are_consistent_with_powi_and_exp() {
        let a = J::from_coeffs(&[c(2.0), c(0.4), Complex64::new(0.1, -0.2), c(0.05), c(0.0)]);
        let r = a.sqrt();
        let sq = r.powi(2);
        let back = a.ln().exp();
        for k in 0..=4 {
            assert!((sq.coeff(k) - a.coeff(k)).norm() < 1e-14);
            assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-14);
        }
        let inv = a.powi(-2) * a.powi(2);
        assert!((inv.coeff(0) - c(1.0)).norm() < 1e-14);
        assert!(inv.coeff(3).norm() < 1e-14);
    }

    #[test]
    fn hyperbolic_identity() {
        let x = J::from_coeffs(&[Complex64::new(0.2, 0.4), c(1.0), c(-0.3), c(0.0), c(0.0)]);
        let one = x.cosh() * x.cosh() - x.sinh() * x.sinh();
        assert!((one.coeff(0) - c(1.0)).norm() < 1e-14);
        for k in 1..=4 {
            assert!(one.coeff(k).norm() < 1e-13);
        }
    }

    #[test]
    fn horner_evaluation_matches_closed_form_for_geometric_series() {
        let one = J::constant(c(1.0));
        let x = J::from_coeffs(&[c(0.0), c(1.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0)]);
        let g = one / (one - x);
        let s = Complex64::new(0.1, 0.05);
        let exact = (Complex64::new(1.0, 0.0) - s).inv();
        assert!((g.eval(s) - exact).norm() < 1e-10);
    }
}
