//! Uncertainty budgets, the sixteen-test worst-case grid and the scripted
//! regulation cases for both loops.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::control::{simulate, ClosedLoop, NoiseSpec, PidGains, Plant, Stimulus, Trace, LFC_DEFAULT_KI};
use crate::dobc::{design_q, make_observer, ObserverConfig};
use crate::error::{ensure, Error, Result};
use crate::metrics::{compute_indices, settling_time, PerformanceReport, DEFAULT_BAND};
use crate::plant::{build_avr, build_lfc, AvrParams, LfcParams};

/// Forecast PV level on the diesel base, pu.
pub const PV_FORECAST: f64 = 1.0 / 6.0;
/// Forecast load level on the diesel base, pu.
pub const LOAD_FORECAST: f64 = 1.0 / 3.0;

pub const LFC_HORIZON: f64 = 40.0;
pub const AVR_HORIZON: f64 = 5.0;
pub const DEFAULT_T_STEP: f64 = 1.0;
pub const CASE_DELAY: f64 = 0.02;

/// The four symmetric budgets of the grid, narrowest first.
pub const GRID_BUDGETS: [(f64, f64); 4] = [(0.9, 1.1), (0.8, 1.2), (0.7, 1.3), (0.6, 1.4)];

/// Admissible band `[ζˡ·P_f, ζᵘ·P_f]` around a forecast `P_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    pub zeta_l: f64,
    pub zeta_u: f64,
    pub forecast_pf: f64,
}

impl UncertaintyBudget {
    pub fn new(zeta_l: f64, zeta_u: f64, forecast_pf: f64) -> Result<Self> {
        let b = Self { zeta_l, zeta_u, forecast_pf };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.zeta_l > 0.0 && self.zeta_l <= 1.0, "zeta_l", "must lie in (0, 1]")?;
        ensure(self.zeta_u >= 1.0 && self.zeta_u.is_finite(), "zeta_u", "must be at least 1")?;
        ensure(self.forecast_pf >= 0.0 && self.forecast_pf.is_finite(), "forecast_pf", "must be non-negative")
    }

    pub fn p_min(&self) -> f64 {
        self.zeta_l * self.forecast_pf
    }

    pub fn p_max(&self) -> f64 {
        self.zeta_u * self.forecast_pf
    }

    pub fn contains(&self, p: f64) -> bool {
        let tol = 1e-12 * self.forecast_pf.max(1.0);
        p >= self.p_min() - tol && p <= self.p_max() + tol
    }
}

/// Largest admissible excursion from the forecast, `(ζᵘ − 1)·P_f`.
pub fn budget_to_step(budget: &UncertaintyBudget) -> f64 {
    (budget.zeta_u - 1.0) * budget.forecast_pf
}

/// One frequency-loop test condition. Steps are magnitudes; they are
/// applied as a PV deficit and a load surplus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub test_number: usize,
    pub pv_budget: UncertaintyBudget,
    pub load_budget: UncertaintyBudget,
    pub pv_step: f64,
    pub load_step: f64,
    pub delay: f64,
    pub noise: Option<NoiseSpec>,
    pub horizon: f64,
    pub t_step: f64,
}

impl Scenario {
    /// Scenario at the worst corner of the given budgets.
    pub fn from_budgets(name: &str, test_number: usize, pv: UncertaintyBudget, load: UncertaintyBudget) -> Self {
        Self {
            name: name.to_string(),
            test_number,
            pv_budget: pv,
            load_budget: load,
            pv_step: budget_to_step(&pv),
            load_step: budget_to_step(&load),
            delay: 0.0,
            noise: None,
            horizon: LFC_HORIZON,
            t_step: DEFAULT_T_STEP,
        }
    }

    /// Checks the post-step PV and load levels against their budgets.
    pub fn validate(&self) -> Result<()> {
        self.pv_budget.validate()?;
        self.load_budget.validate()?;
        ensure(self.pv_step >= 0.0 && self.load_step >= 0.0, "step", "magnitudes must be non-negative")?;
        let pv_level = self.pv_budget.forecast_pf - self.pv_step;
        let load_level = self.load_budget.forecast_pf + self.load_step;
        ensure(self.pv_budget.contains(pv_level), "pv_step", "outside the PV budget")?;
        ensure(self.load_budget.contains(load_level), "load_step", "outside the load budget")?;
        ensure(self.delay >= 0.0, "delay", "must be non-negative")?;
        ensure(self.horizon > self.t_step, "horizon", "must extend past the step time")
    }

    pub fn stimulus(&self) -> Stimulus {
        Stimulus { v_ref: 0.0, pv_change: -self.pv_step, load_change: self.load_step, t_step: self.t_step }
    }

    /// Returns a copy with every step scaled by `k` (forecasts scaled alike).
    pub fn scaled(&self, k: f64) -> Self {
        let mut s = self.clone();
        s.pv_budget.forecast_pf *= k;
        s.load_budget.forecast_pf *= k;
        s.pv_step *= k;
        s.load_step *= k;
        s
    }
}

/// Sixteen tests: load budget outer, PV budget inner, narrowest first.
pub fn generate_table3_grid() -> Vec<Scenario> {
    grid_with_forecasts(PV_FORECAST, LOAD_FORECAST)
}

pub fn grid_with_forecasts(pv_pf: f64, load_pf: f64) -> Vec<Scenario> {
    let mut out = Vec::with_capacity(16);
    for &(ll, lu) in &GRID_BUDGETS {
        for &(pl, pu) in &GRID_BUDGETS {
            let n = out.len() + 1;
            let pv = UncertaintyBudget { zeta_l: pl, zeta_u: pu, forecast_pf: pv_pf };
            let load = UncertaintyBudget { zeta_l: ll, zeta_u: lu, forecast_pf: load_pf };
            out.push(Scenario::from_budgets(&format!("test-{n}"), n, pv, load));
        }
    }
    out
}

/// Grid test numbers `(a, b)` where `b` widens exactly one budget of `a`
/// by one notch.
pub fn widening_chains() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for l in 0..4 {
        for p in 0..4 {
            let n = 4 * l + p + 1;
            if p < 3 {
                out.push((n, n + 1));
            }
            if l < 3 {
                out.push((n, n + 4));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub scenario: Scenario,
    /// `max |Δf|` in Hz; NaN when the run failed.
    pub delta_f_max: f64,
    pub report: Option<PerformanceReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    /// Position in `entries` of the largest `Δf_max` among successful runs.
    pub argmax: Option<usize>,
}

impl SweepResult {
    /// Orders entries by test number and picks the first maximum.
    pub fn from_entries(mut entries: Vec<SweepEntry>) -> Self {
        entries.sort_by_key(|e| e.scenario.test_number);
        let mut argmax: Option<usize> = None;
        for (i, e) in entries.iter().enumerate() {
            if e.error.is_some() {
                continue;
            }
            if argmax.is_none_or(|j| e.delta_f_max > entries[j].delta_f_max) {
                argmax = Some(i);
            }
        }
        Self { entries, argmax }
    }

    pub fn worst(&self) -> Option<&SweepEntry> {
        self.argmax.map(|i| &self.entries[i])
    }

    /// `test,dP_PV,dP_L,delta_f_max,<indices…>,status` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "test,zeta_l_pv,zeta_u_pv,dP_PV,zeta_l_L,zeta_u_L,dP_L,delta_f_max,ISE,ITSE,IAE,ITAE,settling_time,settled,status\n",
        );
        for e in &self.entries {
            let s = &e.scenario;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},",
                s.test_number,
                s.pv_budget.zeta_l,
                s.pv_budget.zeta_u,
                s.pv_step,
                s.load_budget.zeta_l,
                s.load_budget.zeta_u,
                s.load_step,
                e.delta_f_max
            ));
            match (&e.report, &e.error) {
                (Some(r), None) => out.push_str(&format!(
                    "{},{},{},{},{},{},ok\n",
                    r.ise, r.itse, r.iae, r.itae, r.settling_time, r.settled
                )),
                (_, err) => out
                    .push_str(&format!(",,,,,,diverged: {}\n", err.as_deref().unwrap_or("unknown").replace(',', ";"))),
            }
        }
        out
    }
}

/// Runs one grid scenario on `loop_spec`, with the scenario's delay and
/// noise taking precedence over the loop's.
pub fn evaluate_scenario(scenario: &Scenario, loop_spec: &ClosedLoop, dt: f64) -> SweepEntry {
    let outcome = scenario.validate().and_then(|_| {
        let mut spec = loop_spec.clone();
        spec.measurement_delay = scenario.delay;
        spec.load_noise = scenario.noise;
        let trace = simulate(&spec, scenario.stimulus(), dt, scenario.horizon)?;
        let report = lfc_report(&trace, scenario.t_step, spec.controller.has_integral());
        Ok(report)
    });
    match outcome {
        Ok(report) => SweepEntry {
            scenario: scenario.clone(),
            delta_f_max: report.max_overshoot,
            report: Some(report),
            error: None,
        },
        Err(e) => {
            SweepEntry { scenario: scenario.clone(), delta_f_max: f64::NAN, report: None, error: Some(format!("{e}")) }
        }
    }
}

/// Simulates every scenario with the same loop and picks the worst case.
pub fn worst_case_scan(grid: &[Scenario], loop_spec: &ClosedLoop, dt: f64) -> Result<SweepResult> {
    ensure(!grid.is_empty(), "grid", "must contain at least one scenario")?;
    let entries = grid.iter().map(|s| evaluate_scenario(s, loop_spec, dt)).collect();
    Ok(SweepResult::from_entries(entries))
}

/// Frequency-loop report: error is Δf, peak is `max |Δf|`.
pub fn lfc_report(trace: &Trace, t_step: f64, has_integral: bool) -> PerformanceReport {
    let df = trace.channel("delta_f").expect("frequency trace");
    let mut r = compute_indices(df, trace.dt, t_step);
    r.peak_label = String::from("delta_f_max (Hz)");
    let target = if has_integral { 0.0 } else { *df.last().unwrap_or(&0.0) };
    let s = settling_time(df, target, DEFAULT_BAND, trace.dt, t_step);
    r.settling_time = s.time;
    r.settled = s.settled;
    r
}

/// Voltage-loop report: error is `V_ref − V_t`, peak is the largest `V_t`.
pub fn avr_report(trace: &Trace, t_step: f64, has_integral: bool) -> PerformanceReport {
    let vt = trace.channel("v_t").expect("voltage trace");
    let vref = trace.channel("v_ref").expect("voltage trace");
    let err: Vec<f64> = vref.iter().zip(vt).map(|(r, v)| r - v).collect();
    let mut r = compute_indices(&err, trace.dt, t_step);
    r.peak_label = String::from("peak V_t (pu)");
    r.max_overshoot = vt.iter().skip(libm::round(t_step / trace.dt) as usize).fold(f64::MIN, |m, &v| m.max(v));
    let target = if has_integral { *vref.last().unwrap_or(&0.0) } else { *vt.last().unwrap_or(&0.0) };
    let s = settling_time(vt, target, DEFAULT_BAND, trace.dt, t_step);
    r.settling_time = s.time;
    r.settled = s.settled;
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseId {
    AvrA,
    AvrB,
    LfcA,
    LfcB,
    LfcC,
    LfcD,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [CaseId::AvrA, CaseId::AvrB, CaseId::LfcA, CaseId::LfcB, CaseId::LfcC, CaseId::LfcD];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "avr-a" => CaseId::AvrA,
            "avr-b" => CaseId::AvrB,
            "lfc-a" => CaseId::LfcA,
            "lfc-b" => CaseId::LfcB,
            "lfc-c" => CaseId::LfcC,
            "lfc-d" => CaseId::LfcD,
            _ => return Err(Error::UnknownCase(s.to_string())),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseId::AvrA => "avr-a",
            CaseId::AvrB => "avr-b",
            CaseId::LfcA => "lfc-a",
            CaseId::LfcB => "lfc-b",
            CaseId::LfcC => "lfc-c",
            CaseId::LfcD => "lfc-d",
        }
    }

    pub fn is_avr(&self) -> bool {
        matches!(self, CaseId::AvrA | CaseId::AvrB)
    }
}

/// Step, delay and noise of a scripted case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSetup {
    pub stimulus: Stimulus,
    pub delay: f64,
    pub noise: Option<NoiseSpec>,
    pub horizon: f64,
}

/// Knobs shared by the scripted cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseOptions {
    pub pv_forecast: f64,
    pub load_forecast: f64,
    pub t_step: f64,
    /// Load noise used by `lfc-d`.
    pub noise: NoiseSpec,
}

impl Default for CaseOptions {
    fn default() -> Self {
        Self {
            pv_forecast: PV_FORECAST,
            load_forecast: LOAD_FORECAST,
            t_step: DEFAULT_T_STEP,
            noise: NoiseSpec::default(),
        }
    }
}

/// `lfc-a` is the narrowest grid test; `lfc-b/c/d` use the widest one.
pub fn case_setup(case: CaseId, opts: &CaseOptions) -> CaseSetup {
    let grid = grid_with_forecasts(opts.pv_forecast, opts.load_forecast);
    let lfc = |s: &Scenario, delay: f64, noise: Option<NoiseSpec>| {
        let mut stimulus = s.stimulus();
        stimulus.t_step = opts.t_step;
        CaseSetup { stimulus, delay, noise, horizon: LFC_HORIZON }
    };
    let avr = |delay: f64| CaseSetup {
        stimulus: Stimulus { v_ref: 1.0, pv_change: 0.0, load_change: 0.0, t_step: opts.t_step },
        delay,
        noise: None,
        horizon: AVR_HORIZON,
    };
    match case {
        CaseId::AvrA => avr(0.0),
        CaseId::AvrB => avr(CASE_DELAY),
        CaseId::LfcA => lfc(&grid[0], 0.0, None),
        CaseId::LfcB => lfc(&grid[15], 0.0, None),
        CaseId::LfcC => lfc(&grid[15], CASE_DELAY, None),
        CaseId::LfcD => lfc(&grid[15], 0.0, Some(opts.noise)),
    }
}

/// Runs a scripted case on `loop_spec`, whose plant must match the case.
/// `horizon` overrides the case default.
pub fn run_paper_case(
    case: CaseId,
    loop_spec: &ClosedLoop,
    opts: &CaseOptions,
    dt: f64,
    horizon: Option<f64>,
) -> Result<(Trace, PerformanceReport)> {
    let setup = case_setup(case, opts);
    match (&loop_spec.plant, case.is_avr()) {
        (Plant::Avr(_), true) | (Plant::Lfc(_), false) => {}
        _ => return Err(Error::InvalidParameter { name: "case", reason: "plant type does not match the case" }),
    }
    let mut spec = loop_spec.clone();
    spec.measurement_delay = setup.delay;
    spec.load_noise = setup.noise;
    let trace = simulate(&spec, setup.stimulus, dt, horizon.unwrap_or(setup.horizon))?;
    let integral = spec.controller.has_integral();
    let report = if case.is_avr() {
        avr_report(&trace, setup.stimulus.t_step, integral)
    } else {
        lfc_report(&trace, setup.stimulus.t_step, integral)
    };
    Ok((trace, report))
}

/// Illustrative voltage-loop PID used when no profile is supplied.
pub fn avr_default_pid() -> PidGains {
    PidGains::pid(AVR_DEFAULT_KP, AVR_DEFAULT_KI, AVR_DEFAULT_KD, 100.0)
}

pub const AVR_DEFAULT_KP: f64 = 0.5;
pub const AVR_DEFAULT_KI: f64 = 0.3;
pub const AVR_DEFAULT_KD: f64 = 0.1;

/// Frequency loop with default plant, integral gain and optional observer.
pub fn default_lfc_loop(observer: Option<ObserverConfig>) -> Result<ClosedLoop> {
    lfc_loop(&LfcParams::default(), PidGains::integral(LFC_DEFAULT_KI), observer)
}

pub fn lfc_loop(params: &LfcParams, controller: PidGains, observer: Option<ObserverConfig>) -> Result<ClosedLoop> {
    let plant = build_lfc(params)?;
    let mut spec = ClosedLoop::new(Plant::Lfc(plant), controller);
    if let Some(cfg) = observer {
        let obs = make_observer(&spec.plant.nominal(), &design_q(cfg.lambda, cfg.order)?)?;
        spec.observer = Some(obs.with_saturation(cfg.saturation));
    }
    Ok(spec)
}

pub fn default_avr_loop(observer: Option<ObserverConfig>) -> Result<ClosedLoop> {
    avr_loop(&AvrParams::default(), avr_default_pid(), observer)
}

pub fn avr_loop(params: &AvrParams, controller: PidGains, observer: Option<ObserverConfig>) -> Result<ClosedLoop> {
    let plant = build_avr(params)?;
    let mut spec = ClosedLoop::new(Plant::Avr(plant), controller);
    if let Some(cfg) = observer {
        let obs = make_observer(&spec.plant.nominal(), &design_q(cfg.lambda, cfg.order)?)?;
        spec.observer = Some(obs.with_saturation(cfg.saturation));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trunc3(x: f64) -> f64 {
        libm::trunc(x * 1000.0 + 1e-9) / 1000.0
    }

    #[test]
    fn step_examples() {
        let b = UncertaintyBudget::new(0.9, 1.1, 1.0 / 6.0).unwrap();
        assert!((budget_to_step(&b) - 0.016_666).abs() < 1e-5);
        let b = UncertaintyBudget::new(0.6, 1.4, 1.0 / 3.0).unwrap();
        assert!((budget_to_step(&b) - 0.133_333).abs() < 1e-5);
        let b = UncertaintyBudget::new(1.0, 1.0, 0.5).unwrap();
        assert_eq!(budget_to_step(&b), 0.0);
        assert!(UncertaintyBudget::new(1.1, 1.2, 0.5).is_err());
    }

    #[test]
    fn grid_layout() {
        let g = generate_table3_grid();
        assert_eq!(g.len(), 16);
        assert_eq!((trunc3(g[0].pv_step), trunc3(g[0].load_step)), (0.016, 0.033));
        assert_eq!((trunc3(g[1].pv_step), trunc3(g[1].load_step)), (0.033, 0.033));
        assert_eq!((trunc3(g[4].pv_step), trunc3(g[4].load_step)), (0.016, 0.066));
        assert_eq!((trunc3(g[15].pv_step), trunc3(g[15].load_step)), (0.066, 0.133));
        for s in &g {
            s.validate().unwrap();
        }
    }

    #[test]
    fn chains_cover_grid() {
        let c = widening_chains();
        assert_eq!(c.len(), 24);
        assert!(c.contains(&(1, 2)) && c.contains(&(12, 16)));
    }

    #[test]
    fn unknown_case() {
        assert!(matches!(CaseId::parse("lfc-z"), Err(Error::UnknownCase(_))));
        for c in CaseId::ALL {
            assert_eq!(CaseId::parse(c.as_str()).unwrap(), c);
        }
    }

    #[test]
    fn argmax_tie_takes_lowest_test() {
        let g = generate_table3_grid();
        let mk = |i: usize, v: f64| SweepEntry { scenario: g[i].clone(), delta_f_max: v, report: None, error: None };
        let r = SweepResult::from_entries(alloc::vec![mk(2, 1.0), mk(0, 1.0), mk(1, 0.5)]);
        assert_eq!(r.worst().unwrap().scenario.test_number, 1);
    }

    #[test]
    fn failed_runs_excluded() {
        let g = generate_table3_grid();
        let ok = SweepEntry { scenario: g[0].clone(), delta_f_max: 0.1, report: None, error: None };
        let bad = SweepEntry { scenario: g[1].clone(), delta_f_max: f64::NAN, report: None, error: Some("x".into()) };
        let r = SweepResult::from_entries(alloc::vec![bad, ok]);
        assert_eq!(r.worst().unwrap().scenario.test_number, 1);
    }
}
