//! Integral error indices, peak excursion and settling time.

use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

pub const DEFAULT_BAND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub ise: f64,
    pub itse: f64,
    pub iae: f64,
    pub itae: f64,
    /// Peak value named by `peak_label` (|Δf| peak or terminal-voltage peak).
    pub max_overshoot: f64,
    pub peak_label: String,
    /// Seconds after the disturbance onset; the remaining horizon when
    /// `settled` is false.
    pub settling_time: f64,
    pub settled: bool,
    pub band_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settling {
    pub time: f64,
    pub settled: bool,
}

fn start_index(t0: f64, dt: f64) -> usize {
    libm::round(t0 / dt).max(0.0) as usize
}

/// Trapezoidal ISE, ITSE, IAE and ITAE of `error` from `t0`, with time
/// measured from `t0`. The peak field holds `max |e|` and settling is
/// taken towards zero.
pub fn compute_indices(error: &[f64], dt: f64, t0: f64) -> PerformanceReport {
    let k0 = start_index(t0, dt).min(error.len());
    let e = &error[k0..];
    let (mut ise, mut itse, mut iae, mut itae) = (0.0, 0.0, 0.0, 0.0);
    for k in 1..e.len() {
        let (ta, tb) = ((k - 1) as f64 * dt, k as f64 * dt);
        let (a, b) = (e[k - 1], e[k]);
        ise += 0.5 * dt * (a * a + b * b);
        itse += 0.5 * dt * (ta * a * a + tb * b * b);
        iae += 0.5 * dt * (a.abs() + b.abs());
        itae += 0.5 * dt * (ta * a.abs() + tb * b.abs());
    }
    let peak = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let s = settling_time(error, 0.0, DEFAULT_BAND, dt, t0);
    PerformanceReport {
        ise,
        itse,
        iae,
        itae,
        max_overshoot: peak,
        peak_label: String::from("max |e|"),
        settling_time: s.time,
        settled: s.settled,
        band_fraction: DEFAULT_BAND,
    }
}

/// Last exit of `signal` from `final ± band_fraction·size`, measured from
/// `t0`, where `size` is the change from the value at `t0` to `final_value`.
/// For regulation traces that start and end at the same level the size is
/// the peak excursion instead. The exit instant is interpolated linearly
/// between samples.
pub fn settling_time(signal: &[f64], final_value: f64, band_fraction: f64, dt: f64, t0: f64) -> Settling {
    let k0 = start_index(t0, dt);
    if k0 >= signal.len() {
        return Settling { time: 0.0, settled: true };
    }
    let s = &signal[k0..];
    let peak = s.iter().fold(0.0f64, |m, x| m.max((x - final_value).abs()));
    let step = (final_value - s[0]).abs();
    let size = if step < 0.01 * peak { peak } else { step };
    let band = band_fraction.abs() * size;
    let outside = |x: f64| (x - final_value).abs() > band;

    match s.iter().rposition(|&x| outside(x)) {
        None => Settling { time: 0.0, settled: true },
        Some(k) if k + 1 == s.len() => Settling { time: k as f64 * dt, settled: false },
        Some(k) => {
            let (a, b) = ((s[k] - final_value).abs(), (s[k + 1] - final_value).abs());
            let frac = if a > b { (a - band) / (a - b) } else { 0.0 };
            Settling { time: (k as f64 + frac.clamp(0.0, 1.0)) * dt, settled: true }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

pub const REPORT_COLUMNS: [&str; 6] = ["ISE", "ITSE", "IAE", "ITAE", "MO", "Settling Time"];

/// Renders rows as an aligned text table or CSV, columns
/// `ISE ITSE IAE ITAE MO Settling Time`. Unsettled rows carry a `*` in
/// text and a `settled` column in CSV.
pub fn render_report<'a, I>(rows: I, format: ReportFormat) -> String
where
    I: IntoIterator<Item = (&'a str, &'a PerformanceReport)>,
{
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("case");
            for c in REPORT_COLUMNS {
                out.push(',');
                out.push_str(c);
            }
            out.push_str(",settled\n");
            for (name, r) in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    name, r.ise, r.itse, r.iae, r.itae, r.max_overshoot, r.settling_time, r.settled
                ));
            }
        }
        ReportFormat::Text => {
            out.push_str(&format!("{:<24}", "case"));
            for c in REPORT_COLUMNS {
                out.push_str(&format!(" {:>14}", c));
            }
            out.push('\n');
            for (name, r) in rows {
                out.push_str(&format!("{:<24}", name));
                for v in [r.ise, r.itse, r.iae, r.itae, r.max_overshoot] {
                    out.push_str(&format!(" {:>14.6}", v));
                }
                let flag = if r.settled { "" } else { "*" };
                out.push_str(&format!(" {:>13.4}{:1}\n", r.settling_time, flag));
            }
        }
    }
    out
}
