//! Rational SISO transfer functions and their frequency response.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::stability;

/// `num(s) / den(s)` with a monic denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

/// One sample of a Bode diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    /// rad/s
    pub omega: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
}

impl TransferFunction {
    /// Builds `num/den`, rescaling both so the denominator is monic.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroPolynomial);
        }
        let lead = den.leading();
        Ok(Self { num: num.scale(1.0 / lead), den: den.scale(1.0 / lead) })
    }

    /// Convenience constructor from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        Self { num: Polynomial::constant(k), den: Polynomial::one() }
    }

    /// `k / (1 + s·tau)`
    pub fn first_order_lag(k: f64, tau: f64) -> Result<Self> {
        Self::from_coeffs(&[k], &[1.0, tau])
    }

    /// `k / s`
    pub fn integrator(k: f64) -> Self {
        Self { num: Polynomial::constant(k), den: Polynomial::s() }
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    /// `deg(den) - deg(num)`; negative for improper functions.
    pub fn relative_degree(&self) -> isize {
        if self.num.is_zero() {
            return 0;
        }
        self.den.degree() as isize - self.num.degree() as isize
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// Series connection `self · other`.
    pub fn series(&self, other: &Self) -> Self {
        Self { num: &self.num * &other.num, den: &self.den * &other.den }
    }

    /// Parallel connection `self + other`.
    pub fn parallel(&self, other: &Self) -> Self {
        let num = &(&self.num * &other.den) + &(&other.num * &self.den);
        Self { num, den: &self.den * &other.den }
    }

    /// Negative feedback `self / (1 + self·feedback)`.
    pub fn feedback(&self, feedback: &Self) -> Result<Self> {
        let num = &self.num * &feedback.den;
        let den = &(&self.den * &feedback.den) + &(&self.num * &feedback.num);
        if den.is_zero() {
            return Err(Error::DegenerateFeedback);
        }
        Self::new(num, den)
    }

    /// Reciprocal `den/num`; may be improper.
    pub fn inverse(&self) -> Result<Self> {
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { num: self.num.scale(k), den: self.den.clone() }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.num.eval_complex(s) / self.den.eval_complex(s)
    }

    /// Value at `s = 0` (infinite for a pole at the origin).
    pub fn dc_gain(&self) -> f64 {
        self.num.coeff(0) / self.den.coeff(0)
    }

    /// Numerator and denominator rescaled so the denominator's constant
    /// term is one, i.e. the `K / (1 + a₁s + …)` form. Returns `None`
    /// when the denominator has a root at the origin.
    pub fn unit_constant_form(&self) -> Option<(Polynomial, Polynomial)> {
        let c0 = self.den.coeff(0);
        if c0 == 0.0 {
            return None;
        }
        Some((self.num.scale(1.0 / c0), self.den.scale(1.0 / c0)))
    }

    pub fn poles(&self) -> Vec<Complex64> {
        stability::poles(&self.den)
    }

    pub fn zeros(&self) -> Vec<Complex64> {
        stability::poles(&self.num)
    }

    /// Gain (dB) and phase (degrees) at `omega` rad/s.
    ///
    /// The phase is continuous in `omega`: the principal argument is moved
    /// onto the branch selected by summing per-root angle contributions, so
    /// an n-th order all-pole low-pass reports phases in `(-n·90°, 0]`.
    pub fn frequency_response(&self, omega: f64) -> Result<FrequencyPoint> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter { name: "omega", reason: "must be positive and finite" });
        }
        let jw = Complex64::new(0.0, omega);
        let den = self.den.eval_complex(jw);
        let scale: f64 = self.den.coeffs().iter().enumerate().map(|(k, c)| c.abs() * libm::pow(omega, k as f64)).sum();
        if den.norm() <= 8.0 * f64::EPSILON * scale {
            return Err(Error::PoleOnAxis { omega });
        }
        let value = self.num.eval_complex(jw) / den;
        let gain_db = 20.0 * libm::log10(value.norm());

        let mut branch = lead_angle(self.num.leading()) - lead_angle(self.den.leading());
        for z in self.zeros() {
            branch += (jw - z).arg();
        }
        for p in self.poles() {
            branch -= (jw - p).arg();
        }
        let principal = value.arg();
        let turns = libm::round((branch - principal) / (2.0 * PI));
        let phase = principal + 2.0 * PI * turns;

        Ok(FrequencyPoint { omega, gain_db, phase_deg: phase.to_degrees() })
    }
}

fn lead_angle(c: f64) -> f64 {
    if c < 0.0 {
        PI
    } else {
        0.0
    }
}

/// `a·b`, free-function form of [`TransferFunction::series`].
pub fn compose_series(a: &TransferFunction, b: &TransferFunction) -> TransferFunction {
    a.series(b)
}

/// Negative-feedback closure `G/(1 + G·H)`.
pub fn compose_feedback(forward: &TransferFunction, feedback: &TransferFunction) -> Result<TransferFunction> {
    forward.feedback(feedback)
}

/// Logarithmically spaced frequencies from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    (0..points).map(|i| libm::pow(10.0, a + (b - a) * i as f64 / (points - 1) as f64)).collect()
}
