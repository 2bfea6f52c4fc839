//! Controllable-canonical state-space realizations and fixed-step RK4.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tf::{FrequencyPoint, TransferFunction};

/// SISO model `x' = A x + B u`, `y = C x + D u` with its integrator state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    n: usize,
    /// row-major n×n
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
    state: Vec<f64>,
}

impl StateSpaceModel {
    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n || c.len() != n {
            return Err(Error::InvalidParameter {
                name: "state-space matrices",
                reason: "dimensions are inconsistent",
            });
        }
        Ok(Self { n, a, b, c, d, state: vec![0.0; n] })
    }

    /// Controllable canonical realization of a proper transfer function.
    ///
    /// With a monic denominator `sⁿ + aₙ₋₁sⁿ⁻¹ + … + a₀` the last row of `A`
    /// is `[-a₀ … -aₙ₋₁]`, `B = eₙ`, and `C` holds the strictly proper part
    /// of the numerator after the feedthrough `D = bₙ` has been removed.
    pub fn from_tf(tf: &TransferFunction) -> Result<Self> {
        if !tf.is_proper() {
            return Err(Error::Improper { num: tf.num().degree(), den: tf.den().degree() });
        }
        let den = tf.den();
        let n = den.degree();
        let lead = den.leading();
        let num = tf.num().scale(1.0 / lead);
        let den_coeff = |k: usize| den.coeff(k) / lead;

        let d = num.coeff(n);
        let mut a = vec![0.0; n * n];
        for i in 0..n.saturating_sub(1) {
            a[i * n + i + 1] = 1.0;
        }
        if n > 0 {
            for j in 0..n {
                a[(n - 1) * n + j] = -den_coeff(j);
            }
        }
        let mut b = vec![0.0; n];
        if n > 0 {
            b[n - 1] = 1.0;
        }
        let c = (0..n).map(|k| num.coeff(k) - d * den_coeff(k)).collect();
        Self::new(a, b, c, d)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, x: &[f64]) {
        self.state.copy_from_slice(x);
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn has_feedthrough(&self) -> bool {
        self.d != 0.0
    }

    /// `C x + D u` for an explicit state.
    pub fn output_at(&self, x: &[f64], u: f64) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum::<f64>() + self.d * u
    }

    pub fn output(&self, u: f64) -> f64 {
        self.output_at(&self.state, u)
    }

    /// Writes `A x + B u` into `dx`.
    pub fn derivative(&self, x: &[f64], u: f64, dx: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            dx[i] = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[i] * u;
        }
    }

    /// One classical RK4 step with `u` held over the step; returns the
    /// output at the end of the step.
    pub fn step_rk4(&mut self, u: f64, dt: f64) -> Result<f64> {
        self.step_rk4_ramp(u, u, dt)
    }

    /// RK4 step with the input varying linearly from `u0` to `u1` across
    /// the step; returns the output at the end of the step.
    pub fn step_rk4_ramp(&mut self, u0: f64, u1: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter { name: "dt", reason: "must be positive" });
        }
        let n = self.n;
        if n > 0 {
            let um = 0.5 * (u0 + u1);
            let x0 = self.state.clone();
            let mut k1 = vec![0.0; n];
            let mut k2 = vec![0.0; n];
            let mut k3 = vec![0.0; n];
            let mut k4 = vec![0.0; n];
            let mut tmp = vec![0.0; n];
            self.derivative(&x0, u0, &mut k1);
            for i in 0..n {
                tmp[i] = x0[i] + 0.5 * dt * k1[i];
            }
            self.derivative(&tmp, um, &mut k2);
            for i in 0..n {
                tmp[i] = x0[i] + 0.5 * dt * k2[i];
            }
            self.derivative(&tmp, um, &mut k3);
            for i in 0..n {
                tmp[i] = x0[i] + dt * k3[i];
            }
            self.derivative(&tmp, u1, &mut k4);
            for i in 0..n {
                self.state[i] = x0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if self.state.iter().any(|x| !x.is_finite()) {
                return Err(Error::Divergence { time: f64::NAN });
            }
        }
        Ok(self.output(u1))
    }

    /// `C (jωI − A)⁻¹ B + D`, evaluated by a complex linear solve.
    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        let n = self.n;
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let jw = Complex64::new(0.0, omega);
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { jw } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[i * n + j], 0.0)
        });
        let rhs = DVector::from_iterator(n, self.b.iter().map(|&b| Complex64::new(b, 0.0)));
        let x = m.lu().solve(&rhs).ok_or(Error::PoleOnAxis { omega })?;
        let y: Complex64 = self.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
        Ok(y + self.d)
    }

    /// Gain and principal-branch phase of the realized model.
    pub fn frequency_response(&self, omega: f64) -> Result<FrequencyPoint> {
        let h = self.response_at(omega)?;
        Ok(FrequencyPoint { omega, gain_db: 20.0 * libm::log10(h.norm()), phase_deg: h.arg().to_degrees() })
    }
}

/// Realizes `tf` in controllable canonical form.
pub fn to_state_space(tf: &TransferFunction) -> Result<StateSpaceModel> {
    StateSpaceModel::from_tf(tf)
}
