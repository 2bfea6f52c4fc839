//! Second-order continuous-time identification by least squares on
//! state-variable-filtered signals, plus integral-loop stability checks.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::ss::StateSpaceModel;
use crate::stability::{poles, routh_hurwitz_stable};
use crate::tf::TransferFunction;

/// Results below this fit are flagged as unreliable.
pub const FIT_FLAG_THRESHOLD: f64 = 50.0;

/// Default state-variable-filter bandwidth, rad/s.
pub const DEFAULT_FILTER_BANDWIDTH: f64 = 200.0;

const PARAMS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdDataset {
    pub dt: f64,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl IdDataset {
    pub fn new(dt: f64, u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let d = Self { dt, u, y };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt.is_finite(), "dt", "must be positive")?;
        ensure(self.u.len() == self.y.len(), "dataset", "input and output lengths differ")?;
        ensure(self.u.len() >= 10 * PARAMS, "dataset", "needs at least 30 samples")?;
        ensure(self.u.iter().chain(&self.y).all(|v| v.is_finite()), "dataset", "contains non-finite samples")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdResult {
    /// `b0 / (s² + a1·s + a0)`
    pub model: TransferFunction,
    pub b0: f64,
    pub a1: f64,
    pub a0: f64,
    /// Normalized-RMSE fit of the free-run simulation, clamped to [0, 100].
    pub fit_percent: f64,
    pub stable: bool,
    /// Set when `fit_percent` is below [`FIT_FLAG_THRESHOLD`].
    pub flagged: bool,
}

/// Filter state for `ω²/(s + ω)²`, read back as `F·v`, `s·F·v`, `s²·F·v`.
struct Svf {
    model: StateSpaceModel,
    w: f64,
}

impl Svf {
    fn new(w: f64) -> Self {
        let model = StateSpaceModel::new(vec![0.0, 1.0, -w * w, -2.0 * w], vec![0.0, 1.0], vec![w * w, 0.0], 0.0)
            .expect("2×2 realization");
        Self { model, w }
    }

    fn taps(&self, v: f64) -> [f64; 3] {
        let x = self.model.state();
        let w2 = self.w * self.w;
        [w2 * x[0], w2 * x[1], w2 * (v - w2 * x[0] - 2.0 * self.w * x[1])]
    }

    /// Filtered sequences, input interpolated linearly between samples.
    fn run(w: f64, v: &[f64], dt: f64) -> Result<[Vec<f64>; 3]> {
        let mut f = Self::new(w);
        let mut out = [Vec::with_capacity(v.len()), Vec::with_capacity(v.len()), Vec::with_capacity(v.len())];
        for k in 0..v.len() {
            if k > 0 {
                f.model.step_rk4_ramp(v[k - 1], v[k], dt)?;
            }
            for (o, t) in out.iter_mut().zip(f.taps(v[k])) {
                o.push(t);
            }
        }
        Ok(out)
    }
}

/// Fits with the default filter bandwidth.
pub fn fit_second_order(data: &IdDataset) -> Result<IdResult> {
    fit_second_order_with(data, DEFAULT_FILTER_BANDWIDTH)
}

/// Regresses `s²F·y = b0·F·u − a1·sF·y − a0·F·y` over all samples, with
/// `F = ω_f²/(s + ω_f)²`, then scores the model by free-run simulation.
pub fn fit_second_order_with(data: &IdDataset, filter_bandwidth: f64) -> Result<IdResult> {
    data.validate()?;
    ensure(filter_bandwidth > 0.0 && filter_bandwidth.is_finite(), "filter_bandwidth", "must be positive")?;
    let [uf, _, _] = Svf::run(filter_bandwidth, &data.u, data.dt)?;
    let [yf0, yf1, yf2] = Svf::run(filter_bandwidth, &data.y, data.dt)?;

    let n = data.u.len();
    let cols = [&uf, &yf1, &yf0];
    let scale: Vec<f64> = cols.iter().map(|c| libm::sqrt(c.iter().map(|v| v * v).sum::<f64>())).collect();
    if scale.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::RankDeficient);
    }
    let phi = DMatrix::from_fn(n, PARAMS, |i, j| cols[j][i] / scale[j]);
    let rhs = DVector::from_column_slice(&yf2);
    let svd = phi.svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::RankDeficient);
    }
    let theta = svd.solve(&rhs, 1e-12 * smax).map_err(|_| Error::RankDeficient)?;
    let b0 = theta[0] / scale[0];
    let a1 = -theta[1] / scale[1];
    let a0 = -theta[2] / scale[2];

    let model = TransferFunction::from_coeffs(&[b0], &[a0, a1, 1.0])?;
    let stable = routh_hurwitz_stable(model.den())?;
    let fit_percent = free_run_fit(&model, data);
    Ok(IdResult { model, b0, a1, a0, fit_percent, stable, flagged: fit_percent < FIT_FLAG_THRESHOLD })
}

/// `100·(1 − ‖y − ŷ‖/‖y − ȳ‖)` with `ŷ` simulated from rest.
pub fn free_run_fit(model: &TransferFunction, data: &IdDataset) -> f64 {
    let Ok(mut ss) = StateSpaceModel::from_tf(model) else {
        return 0.0;
    };
    let mean = data.y.iter().sum::<f64>() / data.y.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    let mut yhat = ss.output(data.u[0]);
    for k in 0..data.y.len() {
        if k > 0 {
            match ss.step_rk4_ramp(data.u[k - 1], data.u[k], data.dt) {
                Ok(v) => yhat = v,
                Err(_) => return 0.0,
            }
        }
        num += (data.y[k] - yhat) * (data.y[k] - yhat);
        den += (data.y[k] - mean) * (data.y[k] - mean);
    }
    if !(den > 0.0) {
        return 0.0;
    }
    (100.0 * (1.0 - libm::sqrt(num / den))).clamp(0.0, 100.0)
}

/// Ten-level staircase over `horizon` driving `model` from rest, sampled
/// every `dt` with first-order-hold simulation.
pub fn synthetic_dataset(model: &TransferFunction, dt: f64, horizon: f64) -> Result<IdDataset> {
    ensure(dt > 0.0 && horizon > dt, "horizon", "must exceed dt")?;
    const LEVELS: [f64; 10] = [0.0, 0.6, 0.2, 1.0, 0.4, 0.8, 0.1, 0.5, 0.9, 0.3];
    let n = libm::round(horizon / dt) as usize;
    let u: Vec<f64> = (0..=n).map(|k| LEVELS[(k * 20 / n) % LEVELS.len()]).collect();
    let mut ss = StateSpaceModel::from_tf(model)?;
    let mut y = Vec::with_capacity(n + 1);
    y.push(ss.output(u[0]));
    for k in 1..=n {
        y.push(ss.step_rk4_ramp(u[k - 1], u[k], dt)?);
    }
    IdDataset::new(dt, u, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCheck {
    /// Routh-Hurwitz verdict on the characteristic polynomial.
    pub stable: bool,
    /// Verdict from the sign of the rightmost pole.
    pub pole_stable: bool,
    pub poles: Vec<Complex64>,
    pub characteristic: crate::poly::Polynomial,
}

/// Closes `ki/s` around the identified plant with unity feedback; `ki = 0`
/// checks the open-loop plant.
pub fn verify_stability(result: &IdResult, ki: f64) -> Result<StabilityCheck> {
    let characteristic = if ki == 0.0 {
        result.model.den().clone()
    } else {
        let open = TransferFunction::integrator(ki).series(&result.model);
        open.feedback(&TransferFunction::gain(1.0))?.den().clone()
    };
    let stable = routh_hurwitz_stable(&characteristic)?;
    let p = poles(&characteristic);
    let pole_stable = p.iter().all(|z| z.re < 0.0);
    Ok(StabilityCheck { stable, pole_stable, poles: p, characteristic })
}

/// Integral gain at which `s³ + a1·s² + a0·s + ki·b0` loses stability.
pub fn critical_integral_gain(result: &IdResult) -> f64 {
    result.a1 * result.a0 / result.b0
}
