//! Disturbance observer: Q-filter design and the two-branch estimator
//! `d̂ = Q·Gₙ⁻¹·y − Q·x`.
//!
//! `Gₙ⁻¹` is improper and is never realized on its own. The measured-output
//! branch realizes the product `Q·Gₙ⁻¹` as one rational block, which is
//! proper whenever the filter order is at least the relative degree of `Gₙ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::ss::StateSpaceModel;
use crate::tf::TransferFunction;

/// `Q(s) = 1 / (λs + 1)ⁿ`
#[derive(Debug, Clone, PartialEq)]
pub struct QFilter {
    pub lambda: f64,
    pub order: usize,
    pub tf: TransferFunction,
}

impl QFilter {
    /// Frequency (rad/s) where `|Q|` falls to `1/√2`.
    pub fn cutoff(&self) -> f64 {
        let n = self.order as f64;
        libm::sqrt(libm::pow(2.0, 1.0 / n) - 1.0) / self.lambda
    }
}

pub fn design_q(lambda: f64, order: usize) -> Result<QFilter> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter { name: "lambda", reason: "must be positive" });
    }
    if order == 0 {
        return Err(Error::InvalidParameter { name: "order", reason: "must be at least 1" });
    }
    let den = Polynomial::binomial_power(lambda, 1.0, order);
    Ok(QFilter { lambda, order, tf: TransferFunction::new(Polynomial::one(), den)? })
}

/// λ values of the standard filter comparison, widest to narrowest.
pub const LAMBDA_SWEEP: [f64; 11] = [5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.2, 0.15, 0.1, 0.05, 0.01];

/// Gain and phase of `Q` at a probe frequency, and its −3 dB cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub lambda: f64,
    pub order: usize,
    pub probe_omega: f64,
    pub gain_db: f64,
    pub phase_deg: f64,
    pub cutoff: f64,
}

pub fn filter_summary(lambda: f64, order: usize, probe_omega: f64) -> Result<FilterSummary> {
    let q = design_q(lambda, order)?;
    let p = q.tf.frequency_response(probe_omega)?;
    Ok(FilterSummary { lambda, order, probe_omega, gain_db: p.gain_db, phase_deg: p.phase_deg, cutoff: q.cutoff() })
}

/// Observer settings as they appear in run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub lambda: f64,
    pub order: usize,
    /// Symmetric clamp on `d̂`, in plant-input units (`inf` disables it).
    #[serde(default = "default_saturation")]
    pub saturation: f64,
}

fn default_saturation() -> f64 {
    10.0
}

impl ObserverConfig {
    /// λ = 0.01 with a fourth-order filter and no clamp: a reference step
    /// reaches `d̂` through the feedthrough of `Q·Gₙ⁻¹` (4·10⁻⁵/λ⁴ for the
    /// default exciter chain), and clipping that spike undoes the tracking
    /// benefit.
    pub fn avr_default() -> Self {
        Self { lambda: 0.01, order: 4, saturation: f64::INFINITY }
    }

    /// Third-order filter matched to the relative degree of the
    /// droop-closed frequency loop.
    pub fn lfc_default() -> Self {
        Self { lambda: LFC_DEFAULT_LAMBDA, order: 3, saturation: default_saturation() }
    }

    /// λ = 0.02, second order, for the identified hardware plant.
    pub fn hardware_default() -> Self {
        Self { lambda: 0.02, order: 2, saturation: default_saturation() }
    }
}

pub const LFC_DEFAULT_LAMBDA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceObserver {
    pub q_filter: QFilter,
    pub nominal_plant: TransferFunction,
    /// `Q·Gₙ⁻¹`, driven by the measured output.
    pub branch_yq: StateSpaceModel,
    /// `Q`, driven by the plant input.
    pub branch_xq: StateSpaceModel,
    pub saturation: f64,
    pub last_estimate: f64,
}

pub fn make_observer(nominal: &TransferFunction, q: &QFilter) -> Result<DisturbanceObserver> {
    if nominal.num().is_zero() {
        return Err(Error::InvalidParameter { name: "nominal", reason: "plant has zero gain and cannot be inverted" });
    }
    let rel = nominal.relative_degree();
    if rel < 0 {
        return Err(Error::Improper { num: nominal.num().degree(), den: nominal.den().degree() });
    }
    if q.order < rel as usize {
        return Err(Error::FilterOrderTooLow { order: q.order, required: rel as usize });
    }
    let yq = q.tf.series(&nominal.inverse()?);
    debug_assert!(yq.is_proper());
    Ok(DisturbanceObserver {
        q_filter: q.clone(),
        nominal_plant: nominal.clone(),
        branch_yq: StateSpaceModel::from_tf(&yq)?,
        branch_xq: StateSpaceModel::from_tf(&q.tf)?,
        saturation: default_saturation(),
        last_estimate: 0.0,
    })
}

impl DisturbanceObserver {
    pub fn with_saturation(mut self, limit: f64) -> Self {
        self.saturation = limit.abs();
        self
    }

    /// `Q·Gₙ⁻¹` as a transfer function.
    pub fn output_branch_tf(&self) -> TransferFunction {
        self.q_filter.tf.series(&self.nominal_plant.inverse().expect("nominal plant is nonzero"))
    }

    /// Advances both branches by one step with `y` and `x` held and
    /// returns the clamped estimate at the end of the step.
    pub fn observe_step(&mut self, y: f64, x: f64, dt: f64) -> Result<f64> {
        let a = self.branch_yq.step_rk4(y, dt)?;
        let b = self.branch_xq.step_rk4(x, dt)?;
        self.last_estimate = (a - b).clamp(-self.saturation, self.saturation);
        Ok(self.last_estimate)
    }

    pub fn reset(&mut self) {
        self.branch_yq.reset();
        self.branch_xq.reset();
        self.last_estimate = 0.0;
    }
}

/// Plant input after subtracting the disturbance estimate.
pub fn feed_forward(controller_output: f64, d_hat: f64) -> f64 {
    controller_output - d_hat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_avr, AvrParams};

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs()
    }

    #[test]
    fn binomial_denominators() {
        let q = design_q(0.01, 4).unwrap();
        let (_, den) = q.tf.unit_constant_form().unwrap();
        for (got, want) in den.coeffs().iter().zip([1.0, 0.04, 6e-4, 4e-6, 1e-8]) {
            assert!(rel_close(*got, want, 1e-12), "{got} vs {want}");
        }
        let q2 = design_q(0.02, 2).unwrap();
        let (_, den) = q2.tf.unit_constant_form().unwrap();
        for (got, want) in den.coeffs().iter().zip([1.0, 0.04, 4e-4]) {
            assert!(rel_close(*got, want, 1e-12));
        }
    }

    #[test]
    fn dc_gain_is_one() {
        for &lambda in &[5.0, 1.0, 0.15, 0.01, 0.003] {
            for order in 1..=6 {
                assert_eq!(design_q(lambda, order).unwrap().tf.dc_gain(), 1.0);
            }
        }
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(design_q(0.0, 4).is_err());
        assert!(design_q(-0.1, 4).is_err());
        assert!(design_q(0.1, 0).is_err());
    }

    #[test]
    fn order_rule() {
        let g = build_avr(&AvrParams::default()).unwrap().open_loop();
        let obs = make_observer(&g, &design_q(0.01, 4).unwrap()).unwrap();
        assert!(obs.branch_yq.has_feedthrough());
        assert_eq!(
            make_observer(&g, &design_q(0.01, 3).unwrap()),
            Err(Error::FilterOrderTooLow { order: 3, required: 4 })
        );
        let hw = TransferFunction::from_coeffs(&[2.68e5], &[4661.0, 303.4, 1.0]).unwrap();
        assert!(make_observer(&hw, &design_q(0.02, 2).unwrap()).is_ok());
    }

    #[test]
    fn zero_history_gives_zero_estimate() {
        let hw = TransferFunction::from_coeffs(&[2.68e5], &[4661.0, 303.4, 1.0]).unwrap();
        let mut obs = make_observer(&hw, &design_q(0.02, 2).unwrap()).unwrap();
        assert_eq!(obs.last_estimate, 0.0);
        for _ in 0..100 {
            assert_eq!(obs.observe_step(0.0, 0.0, 1e-3).unwrap(), 0.0);
        }
    }

    #[test]
    fn feed_forward_subtracts() {
        assert_eq!(feed_forward(0.3, 0.0), 0.3);
        assert_eq!(feed_forward(0.0, 0.5), -0.5);
    }

    #[test]
    fn cutoff_closed_form() {
        let q = design_q(0.01, 4).unwrap();
        let p = q.tf.frequency_response(q.cutoff()).unwrap();
        assert!((p.gain_db + 20.0 * libm::log10(core::f64::consts::SQRT_2)).abs() < 1e-9);
    }
}
