//! Real polynomials in `s`, stored in ascending power order.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Real polynomial `c[0] + c[1]·s + … + c[n]·sⁿ`.
///
/// Trailing (highest-order) zeros are trimmed on construction, so the last
/// stored coefficient is nonzero unless the polynomial is identically zero,
/// in which case it is stored as `[0.0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<f64>", from = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `s`
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// Builds a polynomial from coefficients given highest power first.
    pub fn from_descending(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().rev().copied().collect())
    }

    /// Monic polynomial with the given real roots.
    pub fn from_real_roots(roots: &[f64]) -> Self {
        roots.iter().fold(Self::one(), |acc, &r| &acc * &Self::new(vec![-r, 1.0]))
    }

    /// Coefficients in ascending power order.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficients in descending power order.
    pub fn descending(&self) -> Vec<f64> {
        self.coeffs.iter().rev().copied().collect()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Coefficient of `s^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    /// Real evaluation by Horner's rule.
    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// Complex evaluation by Horner's rule.
    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `(a·s + b)^n` by binomial expansion.
    pub fn binomial_power(a: f64, b: f64, n: usize) -> Self {
        let mut coeffs = Vec::with_capacity(n + 1);
        let mut binom = 1.0_f64;
        for k in 0..=n {
            coeffs.push(binom * libm::pow(a, k as f64) * libm::pow(b, (n - k) as f64));
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        Self::new(coeffs)
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &'a Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &'a Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Polynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![]).is_zero());
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn multiplication_expands() {
        // (s+1)(s+2) = s² + 3s + 2
        let p = &Polynomial::new(vec![1.0, 1.0]) * &Polynomial::new(vec![2.0, 1.0]);
        assert_eq!(p.coeffs(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn binomial_matches_repeated_product() {
        let b = Polynomial::binomial_power(0.01, 1.0, 4);
        let base = Polynomial::new(vec![1.0, 0.01]);
        let mut r = Polynomial::one();
        for _ in 0..4 {
            r = &r * &base;
        }
        for (x, y) in b.coeffs().iter().zip(r.coeffs()) {
            assert!((x - y).abs() <= 1e-15 * y.abs().max(1e-30));
        }
    }

    #[test]
    fn horner_evaluation() {
        let p = Polynomial::from_descending(&[1.0, 303.4, 4661.0]);
        assert_eq!(p.eval(0.0), 4661.0);
        assert_eq!(p.eval(1.0), 1.0 + 303.4 + 4661.0);
        let z = p.eval_complex(Complex64::new(0.0, 1.0));
        assert_eq!(z, Complex64::new(4660.0, 303.4));
    }

    #[test]
    fn subtraction_can_cancel_to_zero() {
        let p = Polynomial::new(vec![1.0, 2.0]);
        assert!((&p - &p).is_zero());
    }
}
