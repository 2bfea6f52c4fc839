//! Run configuration: a TOML file layered over a named base profile.
//!
//! Resolution order, lowest first: built-in or on-disk profile, the
//! `--config` file, then command-line flags.

use std::path::{Path, PathBuf};

use dobc_core::control::ClosedLoop;
use dobc_core::control::{NoiseSpec, PidGains};
use dobc_core::dobc::{design_q, make_observer, ObserverConfig};
use dobc_core::plant::{AvrParams, LfcParams};
use dobc_core::scenario::{avr_loop, lfc_loop, CaseId, CaseOptions};
use dobc_core::tf::TransferFunction;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const DEFAULT_PROFILE: &str = "paper-appendix-a";
pub const PROFILE_DIR_ENV: &str = "DOBC_PROFILE_DIR";

const BUILTIN: [(&str, &str); 2] = [
    ("paper-appendix-a", include_str!("../profiles/paper-appendix-a.toml")),
    ("paper-hardware-b", include_str!("../profiles/paper-hardware-b.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Base profile this configuration extends.
    #[serde(default)]
    pub profile: Option<String>,
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default)]
    pub controller: LoopSet<PidGains>,
    #[serde(default)]
    pub observer: LoopSet<ObserverEntry>,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub solver: SolverSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub lfc: Option<LfcParams>,
    pub avr: Option<AvrParams>,
    pub hardware: Option<HardwarePlant>,
}

/// `b0 / (s² + a1·s + a0)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwarePlant {
    pub b0: f64,
    pub a1: f64,
    pub a0: f64,
}

impl HardwarePlant {
    pub fn transfer_function(&self) -> Result<TransferFunction, CliError> {
        TransferFunction::from_coeffs(&[self.b0], &[self.a0, self.a1, 1.0]).map_err(CliError::from_core)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSet<T> {
    pub lfc: Option<T>,
    pub avr: Option<T>,
    pub hardware: Option<T>,
}

impl<T> Default for LoopSet<T> {
    fn default() -> Self {
        Self { lfc: None, avr: None, hardware: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverEntry {
    #[serde(default = "yes")]
    pub enabled: bool,
    pub lambda: f64,
    pub order: usize,
    #[serde(default = "default_saturation")]
    pub saturation: f64,
}

fn yes() -> bool {
    true
}

fn default_saturation() -> f64 {
    10.0
}

impl ObserverEntry {
    pub fn to_config(self) -> Option<ObserverConfig> {
        self.enabled.then_some(ObserverConfig { lambda: self.lambda, order: self.order, saturation: self.saturation })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub case: Option<String>,
    #[serde(default = "pv_forecast")]
    pub pv_forecast: f64,
    #[serde(default = "load_forecast")]
    pub load_forecast: f64,
    #[serde(default = "t_step")]
    pub t_step: f64,
    #[serde(default)]
    pub noise: NoiseSection,
}

fn pv_forecast() -> f64 {
    CaseOptions::default().pv_forecast
}

fn load_forecast() -> f64 {
    CaseOptions::default().load_forecast
}

fn t_step() -> f64 {
    CaseOptions::default().t_step
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            case: None,
            pv_forecast: pv_forecast(),
            load_forecast: load_forecast(),
            t_step: t_step(),
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma: f64,
    pub hold_interval: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self { sigma: n.sigma, hold_interval: n.hold_interval }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub workers: Option<usize>,
}

fn default_dt() -> f64 {
    1e-3
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { dt: default_dt(), horizon: None, seed: 0, workers: None }
    }
}

/// Flag values that take precedence over the files.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<String>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub workers: Option<usize>,
}

/// Finds a profile by name: `<dir>/<name>.toml` first, then built-ins. A
/// profile may name a base in its own `profile` key; bases are layered
/// beneath it.
pub fn load_profile(name: &str, dir: Option<&Path>) -> Result<Table, CliError> {
    load_chain(name, dir, 0)
}

fn load_chain(name: &str, dir: Option<&Path>, depth: usize) -> Result<Table, CliError> {
    if depth > 8 {
        return Err(CliError::Config(format!("profile `{name}`: inheritance is too deep or cyclic")));
    }
    let mut table = load_single(name, dir)?;
    match table.remove("profile") {
        Some(Value::String(base)) if base != name => {
            let mut merged = load_chain(&base, dir, depth + 1)?;
            merge(&mut merged, table);
            Ok(merged)
        }
        Some(Value::String(_)) | None => Ok(table),
        Some(_) => Err(CliError::Config(format!("profile `{name}`: `profile` must be a string"))),
    }
}

fn load_single(name: &str, dir: Option<&Path>) -> Result<Table, CliError> {
    if let Some(dir) = dir {
        let path = dir.join(format!("{name}.toml"));
        if path.is_file() {
            return read_table(&path);
        }
    }
    let text = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::Config(format!("profile `{name}` not found")))?;
    text.parse::<Table>().map_err(|e| CliError::Config(format!("profile `{name}`: {e}")))
}

pub fn builtin_profiles() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Recursively overlays `top` onto `base`; tables merge, other values replace.
pub fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Loads, layers and validates a configuration.
pub fn resolve(
    config_path: Option<&Path>,
    profile: Option<&str>,
    profile_dir: Option<&Path>,
    overrides: &Overrides,
) -> Result<Config, CliError> {
    let user = match config_path {
        Some(p) => read_table(p)?,
        None => Table::new(),
    };
    let name = profile
        .map(str::to_string)
        .or_else(|| user.get("profile").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_else(|| DEFAULT_PROFILE.to_string());
    let mut table = load_profile(&name, profile_dir)?;
    merge(&mut table, user);
    table.insert("profile".into(), Value::String(name));

    let mut cfg: Config =
        Value::Table(table).try_into().map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    if let Some(c) = &overrides.case {
        cfg.scenario.case = Some(c.clone());
    }
    if let Some(s) = overrides.seed {
        cfg.solver.seed = s;
    }
    if let Some(dt) = overrides.dt {
        cfg.solver.dt = dt;
    }
    if let Some(h) = overrides.horizon {
        cfg.solver.horizon = Some(h);
    }
    if let Some(w) = overrides.workers {
        cfg.solver.workers = Some(w);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn bad(field: &str, why: &str) -> CliError {
    CliError::Config(format!("{field}: {why}"))
}

impl Config {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.solver.dt > 0.0 && self.solver.dt.is_finite()) {
            return Err(bad("solver.dt", "must be positive"));
        }
        if let Some(h) = self.solver.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return Err(bad("solver.horizon", "must be positive"));
            }
        }
        if self.solver.workers == Some(0) {
            return Err(bad("solver.workers", "must be at least 1"));
        }
        if let Some(c) = &self.scenario.case {
            CaseId::parse(c).map_err(|_| bad("scenario.case", &format!("unknown case `{c}`")))?;
        }
        if let Some(p) = &self.plant.lfc {
            p.validate().map_err(CliError::from_core)?;
        }
        if let Some(p) = &self.plant.avr {
            p.validate().map_err(CliError::from_core)?;
        }
        for g in [&self.controller.lfc, &self.controller.avr, &self.controller.hardware].into_iter().flatten() {
            g.validate().map_err(CliError::from_core)?;
        }
        for o in [&self.observer.lfc, &self.observer.avr, &self.observer.hardware].into_iter().flatten() {
            design_q(o.lambda, o.order).map_err(CliError::from_core)?;
            if !(o.saturation > 0.0) {
                return Err(bad("observer.saturation", "must be positive"));
            }
        }
        let n = &self.scenario.noise;
        if !(n.sigma >= 0.0) || !(n.hold_interval > 0.0) {
            return Err(bad("scenario.noise", "sigma must be >= 0 and hold_interval > 0"));
        }
        if !(self.scenario.pv_forecast >= 0.0 && self.scenario.load_forecast >= 0.0) {
            return Err(bad("scenario", "forecasts must be non-negative"));
        }
        Ok(())
    }

    pub fn case(&self) -> Result<CaseId, CliError> {
        let c = self.scenario.case.as_deref().ok_or_else(|| bad("scenario.case", "no case given (use --case)"))?;
        CaseId::parse(c).map_err(|_| bad("scenario.case", &format!("unknown case `{c}`")))
    }

    pub fn case_options(&self) -> CaseOptions {
        CaseOptions {
            pv_forecast: self.scenario.pv_forecast,
            load_forecast: self.scenario.load_forecast,
            t_step: self.scenario.t_step,
            noise: NoiseSpec {
                sigma: self.scenario.noise.sigma,
                hold_interval: self.scenario.noise.hold_interval,
                seed: self.solver.seed,
            },
        }
    }

    fn lfc_params(&self) -> Result<&LfcParams, CliError> {
        self.plant.lfc.as_ref().ok_or_else(|| bad("plant.lfc", "missing from profile"))
    }

    fn avr_params(&self) -> Result<&AvrParams, CliError> {
        self.plant.avr.as_ref().ok_or_else(|| bad("plant.avr", "missing from profile"))
    }

    pub fn hardware(&self) -> Result<HardwarePlant, CliError> {
        self.plant.hardware.ok_or_else(|| bad("plant.hardware", "missing from profile"))
    }

    /// Frequency loop with or without its observer.
    pub fn lfc_loop(&self, with_observer: bool) -> Result<ClosedLoop, CliError> {
        let gains = self.controller.lfc.ok_or_else(|| bad("controller.lfc", "missing from profile"))?;
        let obs = self.observer.lfc.and_then(ObserverEntry::to_config).filter(|_| with_observer);
        lfc_loop(self.lfc_params()?, gains, obs).map_err(CliError::from_core)
    }

    pub fn avr_loop(&self, with_observer: bool) -> Result<ClosedLoop, CliError> {
        let gains = self.controller.avr.ok_or_else(|| bad("controller.avr", "missing from profile"))?;
        let obs = self.observer.avr.and_then(ObserverEntry::to_config).filter(|_| with_observer);
        avr_loop(self.avr_params()?, gains, obs).map_err(CliError::from_core)
    }

    pub fn loop_for(&self, case: CaseId, with_observer: bool) -> Result<ClosedLoop, CliError> {
        if case.is_avr() {
            self.avr_loop(with_observer)
        } else {
            self.lfc_loop(with_observer)
        }
    }

    /// Whether the loop used by `case` has an enabled observer.
    pub fn observer_enabled(&self, case: CaseId) -> bool {
        let o = if case.is_avr() { self.observer.avr } else { self.observer.lfc };
        o.is_some_and(|o| o.enabled)
    }

    /// Checks that the configured hardware observer is realizable.
    pub fn hardware_observer_ok(&self) -> Result<(), CliError> {
        if let (Some(p), Some(o)) = (self.plant.hardware, self.observer.hardware) {
            let q = design_q(o.lambda, o.order).map_err(CliError::from_core)?;
            make_observer(&p.transfer_function()?, &q).map_err(CliError::from_core)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Directory holding extra profiles: the flag, else the environment.
pub fn profile_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(PROFILE_DIR_ENV).map(PathBuf::from))
}
