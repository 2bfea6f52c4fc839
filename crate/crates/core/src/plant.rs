//! Physical models of the islanded PV-diesel microgrid: PV output, the
//! frequency (LFC) loop plant and the voltage (AVR) loop plant.
//!
//! Powers are per-unit on the diesel-generator base, frequency deviation is
//! in Hz and voltages are per-unit. The two loops are decoupled.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::ss::StateSpaceModel;
use crate::tf::TransferFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvParams {
    /// Panel area, m².
    pub area: f64,
    /// Module reference efficiency.
    pub eta_r: f64,
    /// Converter efficiency.
    pub eta_i: f64,
    /// Temperature coefficient, 1/°C.
    pub n_temp: f64,
    /// Reference cell temperature, °C.
    pub t_ref: f64,
    /// Nominal operating cell temperature, °C.
    pub noct: f64,
}

impl Default for PvParams {
    fn default() -> Self {
        Self { area: 10.0, eta_r: 0.15, eta_i: 0.95, n_temp: 0.004, t_ref: 25.0, noct: 45.0 }
    }
}

impl PvParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.area > 0.0, "pv.area", "must be positive")?;
        ensure(self.eta_r > 0.0 && self.eta_r <= 1.0, "pv.eta_r", "must lie in (0, 1]")?;
        ensure(self.eta_i > 0.0 && self.eta_i <= 1.0, "pv.eta_i", "must lie in (0, 1]")?;
        ensure(self.n_temp >= 0.0, "pv.n_temp", "must be non-negative")
    }
}

/// Cell temperature (°C) from irradiance (W/m²) and ambient temperature.
pub fn pv_cell_temp(irradiance: f64, t_ambient: f64, params: &PvParams) -> f64 {
    t_ambient + (params.noct - 20.0) / 800.0 * irradiance
}

/// Array efficiency at a given cell temperature, clamped at zero.
pub fn pv_efficiency(t_cell: f64, params: &PvParams) -> f64 {
    (params.eta_r * params.eta_i * (1.0 - params.n_temp * (t_cell - params.t_ref))).max(0.0)
}

/// PV output power in watts.
pub fn pv_power(irradiance: f64, t_ambient: f64, params: &PvParams) -> f64 {
    let t_cell = pv_cell_temp(irradiance, t_ambient, params);
    irradiance.max(0.0) * pv_efficiency(t_cell, params) * params.area
}

/// Inertia, damping and nominal frequency of the islanded system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSystemParams {
    /// Inertia constant H, s.
    pub inertia_h: f64,
    /// Damping D, pu MW/Hz.
    pub damping_d: f64,
    /// Nominal frequency, Hz.
    pub f_nominal: f64,
    /// Use `T_p = 2·H·D/f°` instead of the swing-equation form.
    #[serde(default)]
    pub literal_time_constant: bool,
}

impl Default for PowerSystemParams {
    fn default() -> Self {
        Self { inertia_h: 1.0, damping_d: 0.0067, f_nominal: 50.0, literal_time_constant: false }
    }
}

impl PowerSystemParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.inertia_h > 0.0, "power_system.inertia_h", "must be positive")?;
        ensure(self.damping_d > 0.0, "power_system.damping_d", "must be positive")?;
        ensure(self.f_nominal > 0.0, "power_system.f_nominal", "must be positive")
    }

    /// `(K_p, T_p)` for the power-system block `K_p / (1 + s·T_p)`.
    pub fn gains(&self) -> (f64, f64) {
        if self.literal_time_constant {
            (1.0 / self.damping_d, 2.0 * self.inertia_h * self.damping_d / self.f_nominal)
        } else {
            power_system_gains(self.inertia_h, self.damping_d, self.f_nominal)
        }
    }
}

/// `K_p = 1/D` and `T_p = 2H/(f°·D)`.
pub fn power_system_gains(h: f64, d: f64, f0: f64) -> (f64, f64) {
    (1.0 / d, 2.0 * h / (f0 * d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfcParams {
    /// Droop R, Hz/pu.
    pub droop_r: f64,
    /// Governor time constant, s.
    pub t_gov: f64,
    /// Diesel engine time constant, s.
    pub t_diesel: f64,
    /// PV converter time constant, s.
    pub t_vsc: f64,
    /// Output L-C filter time constant, s.
    pub t_lc: f64,
    pub power_system: PowerSystemParams,
}

impl Default for LfcParams {
    fn default() -> Self {
        Self {
            droop_r: 2.4,
            t_gov: 0.0728,
            t_diesel: 0.273,
            t_vsc: 0.04,
            t_lc: 0.004,
            power_system: PowerSystemParams::default(),
        }
    }
}

impl LfcParams {
    pub fn validate(&self) -> Result<()> {
        ensure(self.droop_r > 0.0, "lfc.droop_r", "must be positive")?;
        ensure(self.t_gov > 0.0, "lfc.t_gov", "must be positive")?;
        ensure(self.t_diesel > 0.0, "lfc.t_diesel", "must be positive")?;
        ensure(self.t_vsc > 0.0, "lfc.t_vsc", "must be positive")?;
        ensure(self.t_lc > 0.0, "lfc.t_lc", "must be positive")?;
        self.power_system.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvrParams {
    pub k_a: f64,
    pub t_a: f64,
    pub k_e: f64,
    pub t_e: f64,
    pub k_g: f64,
    pub t_g: f64,
    pub k_r: f64,
    pub t_r: f64,
}

impl Default for AvrParams {
    fn default() -> Self {
        Self { k_a: 10.0, t_a: 0.1, k_e: 1.0, t_e: 0.4, k_g: 1.0, t_g: 1.0, k_r: 1.0, t_r: 0.01 }
    }
}

impl AvrParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("avr.k_a", self.k_a), ("avr.k_e", self.k_e), ("avr.k_g", self.k_g), ("avr.k_r", self.k_r)] {
            ensure(v >= 0.0 && v.is_finite(), name, "must be a non-negative gain")?;
        }
        for (name, v) in [("avr.t_a", self.t_a), ("avr.t_e", self.t_e), ("avr.t_g", self.t_g), ("avr.t_r", self.t_r)] {
            ensure(v > 0.0, name, "must be positive")?;
        }
        Ok(())
    }
}

/// Frequency-loop plant blocks.
///
/// Governor input is the secondary-control signal minus `Δf/R`; the power
/// system integrates `ΔP_DG + ΔP_PV − ΔP_L` where `ΔP_PV` passes through the
/// converter and L-C filter lags first.
#[derive(Debug, Clone, PartialEq)]
pub struct LfcPlant {
    pub params: LfcParams,
    pub governor: TransferFunction,
    pub diesel: TransferFunction,
    pub vsc: TransferFunction,
    pub lc_filter: TransferFunction,
    pub power_system: TransferFunction,
    /// `1/R`
    pub droop_gain: f64,
}

impl LfcPlant {
    /// Governor and diesel in series, control input to `ΔP_DG` without droop.
    pub fn generation_path(&self) -> TransferFunction {
        self.governor.series(&self.diesel)
    }

    /// PV command to injected power.
    pub fn pv_path(&self) -> TransferFunction {
        self.vsc.series(&self.lc_filter)
    }

    /// Control input to `Δf` with the droop loop closed. This is the
    /// nominal plant seen by the frequency-loop disturbance observer.
    pub fn control_to_frequency(&self) -> TransferFunction {
        let forward = self.generation_path().series(&self.power_system);
        forward.feedback(&TransferFunction::gain(self.droop_gain)).expect("droop loop has a nonzero denominator")
    }

    /// Net load disturbance to `Δf` with the droop loop closed.
    pub fn load_to_frequency(&self) -> TransferFunction {
        let loop_gain = self.generation_path().scaled(self.droop_gain);
        self.power_system.feedback(&loop_gain).expect("droop loop has a nonzero denominator").scaled(-1.0)
    }

    /// Steady-state `Δf` (Hz) for step changes with droop only.
    pub fn droop_steady_state(&self, pv_change: f64, load_change: f64) -> f64 {
        let (k_p, _) = self.params.power_system.gains();
        (pv_change - load_change) / (1.0 / k_p + self.droop_gain)
    }

    pub fn realize(&self) -> Result<[StateSpaceModel; 5]> {
        Ok([
            StateSpaceModel::from_tf(&self.governor)?,
            StateSpaceModel::from_tf(&self.diesel)?,
            StateSpaceModel::from_tf(&self.vsc)?,
            StateSpaceModel::from_tf(&self.lc_filter)?,
            StateSpaceModel::from_tf(&self.power_system)?,
        ])
    }
}

pub fn build_lfc(params: &LfcParams) -> Result<LfcPlant> {
    params.validate()?;
    let (k_p, t_p) = params.power_system.gains();
    Ok(LfcPlant {
        params: *params,
        governor: TransferFunction::first_order_lag(1.0, params.t_gov)?,
        diesel: TransferFunction::first_order_lag(1.0, params.t_diesel)?,
        vsc: TransferFunction::first_order_lag(1.0, params.t_vsc)?,
        lc_filter: TransferFunction::first_order_lag(1.0, params.t_lc)?,
        power_system: TransferFunction::first_order_lag(k_p, t_p)?,
        droop_gain: 1.0 / params.droop_r,
    })
}

/// Voltage-loop plant blocks: amplifier → exciter → generator forward path
/// with the sensor in the feedback path.
#[derive(Debug, Clone, PartialEq)]
pub struct AvrPlant {
    pub params: AvrParams,
    pub amplifier: TransferFunction,
    pub exciter: TransferFunction,
    pub generator: TransferFunction,
    pub sensor: TransferFunction,
}

impl AvrPlant {
    /// Amplifier input to terminal voltage.
    pub fn forward(&self) -> TransferFunction {
        self.amplifier.series(&self.exciter).series(&self.generator)
    }

    /// Amplifier input to sensed voltage: the four-block cascade.
    pub fn open_loop(&self) -> TransferFunction {
        self.forward().series(&self.sensor)
    }

    /// `V_ref → V_t` with unity error gain and no controller.
    pub fn closed_loop(&self) -> Result<TransferFunction> {
        self.forward().feedback(&self.sensor)
    }

    pub fn realize(&self) -> Result<[StateSpaceModel; 4]> {
        Ok([
            StateSpaceModel::from_tf(&self.amplifier)?,
            StateSpaceModel::from_tf(&self.exciter)?,
            StateSpaceModel::from_tf(&self.generator)?,
            StateSpaceModel::from_tf(&self.sensor)?,
        ])
    }
}

pub fn build_avr(params: &AvrParams) -> Result<AvrPlant> {
    params.validate()?;
    Ok(AvrPlant {
        params: *params,
        amplifier: TransferFunction::first_order_lag(params.k_a, params.t_a)?,
        exciter: TransferFunction::first_order_lag(params.k_e, params.t_e)?,
        generator: TransferFunction::first_order_lag(params.k_g, params.t_g)?,
        sensor: TransferFunction::first_order_lag(params.k_r, params.t_r)?,
    })
}
