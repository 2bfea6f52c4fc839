use std::path::Path;

use dobc_core::control::Trace;
use dobc_core::dobc::{design_q, filter_summary, make_observer, LAMBDA_SWEEP};
use dobc_core::metrics::{render_report, PerformanceReport, ReportFormat};
use dobc_core::plant::{build_avr, build_lfc};
use dobc_core::scenario::{
    evaluate_scenario, grid_with_forecasts, run_paper_case, CaseId, Scenario, SweepResult, UncertaintyBudget,
};
use dobc_core::stability::poles;
use dobc_core::sysid::{
    critical_integral_gain, fit_second_order_with, synthetic_dataset, verify_stability, IdDataset,
    DEFAULT_FILTER_BANDWIDTH,
};
use dobc_core::tf::{log_space, TransferFunction};
use rayon::prelude::*;
use toml::{Table, Value};

use crate::artifacts::{csv_table, ArtifactDir};
use crate::config::Config;
use crate::error::CliError;

fn num(v: f64) -> String {
    format!("{v}")
}

/// `(t, columns…)` CSV from selected trace channels.
fn plot_csv(trace: &Trace, channels: &[&str]) -> String {
    let cols: Vec<&[f64]> = channels.iter().map(|c| trace.channel(c).expect("known channel")).collect();
    let mut header = vec!["t"];
    header.extend_from_slice(channels);
    csv_table(
        &header,
        (0..trace.len()).map(|k| {
            let mut row = vec![num(trace.time(k))];
            row.extend(cols.iter().map(|c| num(c[k])));
            row
        }),
    )
}

fn case_rows(rows: &[(String, PerformanceReport)]) -> (String, String) {
    let it = || rows.iter().map(|(n, r)| (n.as_str(), r));
    (render_report(it(), ReportFormat::Text), render_report(it(), ReportFormat::Csv))
}

pub struct SimulateArgs {
    pub no_observer: bool,
}

pub fn simulate(cfg: &Config, args: &SimulateArgs, out: &Path) -> Result<String, CliError> {
    let case = cfg.case()?;
    let observer = cfg.observer_enabled(case) && !args.no_observer;
    let spec = cfg.loop_for(case, observer)?;
    let (trace, report) = run_paper_case(case, &spec, &cfg.case_options(), cfg.solver.dt, cfg.solver.horizon)
        .map_err(CliError::from_core)?;

    let label = format!("{}/{}", case.as_str(), if observer { "dobc" } else { baseline_name(case) });
    let (text, csv) = case_rows(&[(label, report)]);
    let mut dir = ArtifactDir::create(out)?;
    dir.write("trace.csv", &trace.to_csv())?;
    dir.write("report.csv", &csv)?;
    dir.write("report.txt", &text)?;
    let response = if case.is_avr() { &["v_ref", "v_t"][..] } else { &["delta_f"][..] };
    dir.write("plot_response.csv", &plot_csv(&trace, response))?;
    dir.write("plot_disturbance.csv", &plot_csv(&trace, &["d_hat", "d_l"]))?;
    let mut extra = Table::new();
    extra.insert("observer".into(), Value::Boolean(observer));
    dir.finish("simulate", extra, Some(cfg))?;
    Ok(text)
}

fn baseline_name(case: CaseId) -> &'static str {
    if case.is_avr() {
        "pid"
    } else {
        "integral"
    }
}

/// Reads `zeta_l_pv,zeta_u_pv,zeta_l_L,zeta_u_L` rows.
pub fn read_grid(path: &Path, pv_pf: f64, load_pf: f64) -> Result<Vec<Scenario>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.clone();
    let want = ["zeta_l_pv", "zeta_u_pv", "zeta_l_L", "zeta_u_L"];
    let idx: Vec<usize> = want
        .iter()
        .map(|w| {
            headers
                .iter()
                .position(|h| h == *w)
                .ok_or_else(|| CliError::Config(format!("{}: missing column `{w}`", path.display())))
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let v: Vec<f64> = idx
            .iter()
            .map(|&i| {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| CliError::Config(format!("{} line {line}: bad number", path.display())))
            })
            .collect::<Result<_, _>>()?;
        let pv = UncertaintyBudget::new(v[0], v[1], pv_pf)
            .map_err(|e| CliError::Config(format!("{} line {line}: {e}", path.display())))?;
        let load = UncertaintyBudget::new(v[2], v[3], load_pf)
            .map_err(|e| CliError::Config(format!("{} line {line}: {e}", path.display())))?;
        let n = out.len() + 1;
        out.push(Scenario::from_budgets(&format!("test-{n}"), n, pv, load));
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("{}: grid is empty", path.display())));
    }
    Ok(out)
}

pub struct SweepArgs<'a> {
    pub grid: Option<&'a Path>,
    pub no_observer: bool,
}

pub fn sweep(cfg: &Config, args: &SweepArgs, out: &Path) -> Result<String, CliError> {
    let (pv_pf, load_pf) = (cfg.scenario.pv_forecast, cfg.scenario.load_forecast);
    let mut grid = match args.grid {
        Some(p) => read_grid(p, pv_pf, load_pf)?,
        None => grid_with_forecasts(pv_pf, load_pf),
    };
    for s in &mut grid {
        s.t_step = cfg.scenario.t_step;
        if let Some(h) = cfg.solver.horizon {
            s.horizon = h;
        }
    }
    let observer = cfg.observer.lfc.is_some_and(|o| o.enabled) && !args.no_observer;
    let spec = cfg.lfc_loop(observer)?;
    let dt = cfg.solver.dt;

    let workers = cfg.solver.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    let entries = pool.install(|| grid.par_iter().map(|s| evaluate_scenario(s, &spec, dt)).collect());
    let result = SweepResult::from_entries(entries);

    let failed: Vec<_> = result.entries.iter().filter(|e| e.error.is_some()).collect();
    let mut summary = String::new();
    match result.worst() {
        Some(w) => summary.push_str(&format!(
            "worst case: test {} (dP_PV = {:.4} pu, dP_L = {:.4} pu), delta_f_max = {:.4} Hz\n",
            w.scenario.test_number, w.scenario.pv_step, w.scenario.load_step, w.delta_f_max
        )),
        None => summary.push_str("worst case: none (every scenario failed)\n"),
    }
    for e in &failed {
        summary.push_str(&format!("test {} failed: {}\n", e.scenario.test_number, e.error.as_deref().unwrap_or("")));
    }

    let mut dir = ArtifactDir::create(out)?;
    dir.write("sweep.csv", &result.to_csv())?;
    dir.write("sweep_summary.txt", &summary)?;
    let mut extra = Table::new();
    extra.insert("observer".into(), Value::Boolean(observer));
    extra.insert("scenarios".into(), Value::Integer(grid.len() as i64));
    if let Some(g) = args.grid {
        extra.insert("grid".into(), Value::String(g.display().to_string()));
    }
    dir.finish("sweep", extra, Some(cfg))?;

    if failed.len() == result.entries.len() {
        return Err(CliError::Runtime(summary));
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BodeTarget {
    /// Q filter for each requested λ.
    Q,
    /// Voltage-loop forward path including the sensor.
    AvrPlant,
    /// Frequency loop from control input to Δf with droop closed.
    LfcPlant,
    /// Identified laboratory plant.
    HardwarePlant,
    /// Observer output branch `Q·Gₙ⁻¹` of the voltage loop.
    AvrObserver,
    /// Observer output branch of the frequency loop.
    LfcObserver,
}

pub struct BodeArgs {
    pub target: BodeTarget,
    pub lambdas: Option<Vec<f64>>,
    pub order: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub probe: f64,
}

pub fn bode(cfg: &Config, args: &BodeArgs, out: &Path) -> Result<String, CliError> {
    if !(args.omega_min > 0.0 && args.omega_max >= args.omega_min && args.omega_max.is_finite()) || args.points == 0 {
        return Err(CliError::Config(
            "frequency range must satisfy 0 < omega-min <= omega-max with at least one point".into(),
        ));
    }
    if args.points > 1 && args.omega_max == args.omega_min {
        return Err(CliError::Config("omega-min equals omega-max; use --points 1".into()));
    }
    let omegas = log_space(args.omega_min, args.omega_max, args.points);
    let mut series: Vec<(String, TransferFunction)> = Vec::new();
    let mut summary_rows = Vec::new();
    match args.target {
        BodeTarget::Q => {
            let lambdas = args.lambdas.clone().unwrap_or_else(|| LAMBDA_SWEEP.to_vec());
            for &l in &lambdas {
                let q = design_q(l, args.order).map_err(CliError::from_core)?;
                let s = filter_summary(l, args.order, args.probe).map_err(CliError::from_core)?;
                summary_rows.push(vec![num(l), s.order.to_string(), num(s.gain_db), num(s.phase_deg), num(s.cutoff)]);
                series.push((format!("lambda={l}"), q.tf));
            }
        }
        BodeTarget::AvrPlant => {
            let p = build_avr(cfg.plant.avr.as_ref().ok_or_else(|| CliError::Config("plant.avr missing".into()))?)
                .map_err(CliError::from_core)?;
            series.push(("avr-plant".into(), p.open_loop()));
        }
        BodeTarget::LfcPlant => {
            let p = build_lfc(cfg.plant.lfc.as_ref().ok_or_else(|| CliError::Config("plant.lfc missing".into()))?)
                .map_err(CliError::from_core)?;
            series.push(("lfc-plant".into(), p.control_to_frequency()));
        }
        BodeTarget::HardwarePlant => series.push(("hardware-plant".into(), cfg.hardware()?.transfer_function()?)),
        BodeTarget::AvrObserver | BodeTarget::LfcObserver => {
            let spec = if args.target == BodeTarget::AvrObserver { cfg.avr_loop(true)? } else { cfg.lfc_loop(true)? };
            let obs =
                spec.observer.ok_or_else(|| CliError::Config("observer is disabled in the configuration".into()))?;
            series.push(("observer-branch".into(), obs.output_branch_tf()));
        }
    }

    let mut rows = Vec::new();
    let mut pole_rows = Vec::new();
    for (name, tf) in &series {
        for &w in &omegas {
            let p = tf.frequency_response(w).map_err(CliError::from_core)?;
            rows.push(vec![name.clone(), num(p.omega), num(p.gain_db), num(p.phase_deg)]);
        }
        for z in poles(tf.den()) {
            pole_rows.push(vec![name.clone(), num(z.re), num(z.im)]);
        }
    }
    let mut dir = ArtifactDir::create(out)?;
    dir.write("bode.csv", &csv_table(&["series", "omega", "gain_db", "phase_deg"], rows))?;
    dir.write("poles.csv", &csv_table(&["series", "re", "im"], pole_rows))?;
    let mut text = String::new();
    if !summary_rows.is_empty() {
        let probe = format!("{}", args.probe);
        let g = format!("gain_db_at_{probe}");
        let ph = format!("phase_deg_at_{probe}");
        text.push_str(&format!("{:>8} {:>6} {:>16} {:>16} {:>14}\n", "lambda", "order", g, ph, "cutoff_rad_s"));
        for r in &summary_rows {
            text.push_str(&format!(
                "{:>8} {:>6} {:>16.6e} {:>16.6} {:>14.6}\n",
                r[0],
                r[1],
                r[2].parse::<f64>().unwrap_or(f64::NAN),
                r[3].parse::<f64>().unwrap_or(f64::NAN),
                r[4].parse::<f64>().unwrap_or(f64::NAN)
            ));
        }
        dir.write("filter_summary.csv", &csv_table(&["lambda", "order", &g, &ph, "cutoff_rad_s"], summary_rows))?;
    }
    let mut extra = Table::new();
    extra.insert("target".into(), Value::String(format!("{:?}", args.target)));
    extra.insert("omega_min".into(), Value::Float(args.omega_min));
    extra.insert("omega_max".into(), Value::Float(args.omega_max));
    extra.insert("points".into(), Value::Integer(args.points as i64));
    extra.insert("order".into(), Value::Integer(args.order as i64));
    dir.finish("bode", extra, Some(cfg))?;
    Ok(text)
}

/// Reads a `t,u,y` CSV (header required, `time` accepted for `t`) with a
/// uniform sample interval.
pub fn read_dataset(path: &Path) -> Result<IdDataset, CliError> {
    let where_ = |line: u64, msg: &str| CliError::Config(format!("{} line {line}: {msg}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| where_(1, &e.to_string()))?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let (ti, ui, yi) = match (col(&["t", "time"]), col(&["u"]), col(&["y"])) {
        (Some(t), Some(u), Some(y)) => (t, u, y),
        _ => return Err(where_(1, "header must name columns t, u and y")),
    };
    let (mut t, mut u, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            where_(line, &e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| -> Result<f64, CliError> {
            rec.get(i)
                .ok_or_else(|| where_(line, "missing field"))?
                .parse::<f64>()
                .map_err(|_| where_(line, "not a number"))
        };
        t.push(get(ti)?);
        u.push(get(ui)?);
        y.push(get(yi)?);
    }
    if t.len() < 2 {
        return Err(CliError::Config(format!("{}: too few samples", path.display())));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    for (k, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt.abs().max(1e-12) + 1e-12 {
            return Err(where_(k as u64 + 3, "sample interval is not uniform"));
        }
    }
    IdDataset::new(dt, u, y).map_err(CliError::from_core)
}

pub struct SysidArgs<'a> {
    pub data: Option<&'a Path>,
    pub synthetic: bool,
    pub ki: Option<f64>,
    pub filter_bandwidth: Option<f64>,
}

pub fn sysid(cfg: &Config, args: &SysidArgs, out: &Path) -> Result<String, CliError> {
    let mut dir = ArtifactDir::create(out)?;
    let data = match (args.data, args.synthetic) {
        (Some(p), false) => read_dataset(p)?,
        (None, true) => {
            let g = cfg.hardware()?.transfer_function()?;
            let d =
                synthetic_dataset(&g, cfg.solver.dt, cfg.solver.horizon.unwrap_or(2.0)).map_err(CliError::from_core)?;
            let rows = (0..d.u.len()).map(|k| vec![num(k as f64 * d.dt), num(d.u[k]), num(d.y[k])]);
            dir.write("dataset.csv", &csv_table(&["t", "u", "y"], rows))?;
            d
        }
        _ => return Err(CliError::Config("give exactly one of --data or --synthetic".into())),
    };
    let bandwidth = args.filter_bandwidth.unwrap_or(DEFAULT_FILTER_BANDWIDTH);
    let r = fit_second_order_with(&data, bandwidth).map_err(CliError::from_core)?;
    let open = verify_stability(&r, 0.0).map_err(CliError::from_core)?;

    let mut text = format!(
        "model: {} / (s^2 + {} s + {})\nfit_percent: {:.3}{}\nopen_loop_stable: {}\n",
        r.b0,
        r.a1,
        r.a0,
        r.fit_percent,
        if r.flagged { " (low fit, model unreliable)" } else { "" },
        r.stable
    );
    for z in &open.poles {
        text.push_str(&format!("open_loop_pole: {} {:+}j\n", z.re, z.im));
    }
    text.push_str(&format!("critical_integral_gain: {}\n", critical_integral_gain(&r)));
    let mut rows = vec![
        vec!["b0".into(), num(r.b0)],
        vec!["a1".into(), num(r.a1)],
        vec!["a0".into(), num(r.a0)],
        vec!["fit_percent".into(), num(r.fit_percent)],
        vec!["flagged".into(), r.flagged.to_string()],
        vec!["open_loop_stable".into(), r.stable.to_string()],
        vec!["critical_integral_gain".into(), num(critical_integral_gain(&r))],
    ];
    let mut pole_rows: Vec<Vec<String>> =
        open.poles.iter().map(|z| vec!["open_loop".into(), num(z.re), num(z.im)]).collect();
    if let Some(ki) = args.ki {
        let c = verify_stability(&r, ki).map_err(CliError::from_core)?;
        text.push_str(&format!(
            "closed_loop_ki: {ki}\nclosed_loop_stable_routh: {}\nclosed_loop_stable_poles: {}\n",
            c.stable, c.pole_stable
        ));
        for z in &c.poles {
            text.push_str(&format!("closed_loop_pole: {} {:+}j\n", z.re, z.im));
        }
        pole_rows.extend(c.poles.iter().map(|z| vec!["closed_loop".into(), num(z.re), num(z.im)]));
        rows.push(vec!["ki".into(), num(ki)]);
        rows.push(vec!["closed_loop_stable_routh".into(), c.stable.to_string()]);
        rows.push(vec!["closed_loop_stable_poles".into(), c.pole_stable.to_string()]);
    }
    let profile = format!("[plant.hardware]\nb0 = {:?}\na1 = {:?}\na0 = {:?}\n", r.b0, r.a1, r.a0);
    dir.write("identified_profile.toml", &profile)?;
    dir.write("sysid_report.csv", &csv_table(&["quantity", "value"], rows))?;
    dir.write("sysid_report.txt", &text)?;
    dir.write("sysid_poles.csv", &csv_table(&["loop", "re", "im"], pole_rows))?;
    let mut extra = Table::new();
    extra.insert("filter_bandwidth".into(), Value::Float(bandwidth));
    if let Some(p) = args.data {
        extra.insert("data".into(), Value::String(p.display().to_string()));
    }
    extra.insert("samples".into(), Value::Integer(data.u.len() as i64));
    dir.finish("sysid", extra, Some(cfg))?;
    Ok(text)
}

/// Baseline and observer rows for each case.
pub fn report(cfg: &Config, cases: &[CaseId], out: &Path) -> Result<String, CliError> {
    let mut rows = Vec::new();
    for &case in cases {
        let variants: &[bool] = if cfg.observer_enabled(case) { &[false, true] } else { &[false] };
        for &with in variants {
            let spec = cfg.loop_for(case, with)?;
            let (_, r) = run_paper_case(case, &spec, &cfg.case_options(), cfg.solver.dt, cfg.solver.horizon)
                .map_err(CliError::from_core)?;
            let name = format!("{}/{}", case.as_str(), if with { "dobc" } else { baseline_name(case) });
            rows.push((name, r));
        }
    }
    let (text, csv) = case_rows(&rows);
    let mut dir = ArtifactDir::create(out)?;
    dir.write("report.csv", &csv)?;
    dir.write("report.txt", &text)?;
    let mut extra = Table::new();
    extra.insert("cases".into(), Value::Array(cases.iter().map(|c| Value::String(c.as_str().into())).collect()));
    dir.finish("report", extra, Some(cfg))?;
    Ok(text)
}

/// Checks the configured hardware observer can be built.
pub fn check_hardware(cfg: &Config) -> Result<(), CliError> {
    if cfg.plant.hardware.is_some() {
        cfg.hardware_observer_ok()?;
        let p = cfg.hardware()?.transfer_function()?;
        if let Some(o) = cfg.observer.hardware {
            let q = design_q(o.lambda, o.order).map_err(CliError::from_core)?;
            make_observer(&p, &q).map_err(CliError::from_core)?;
        }
    }
    Ok(())
}
