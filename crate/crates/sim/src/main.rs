//! `dobc`: simulate, sweep, analyse and identify DOBC-regulated microgrid loops.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dobc_core::scenario::CaseId;

use commands::BodeTarget;
use config::{profile_dir, resolve, Config, Overrides, PROFILE_DIR_ENV};
use error::CliError;

#[derive(Parser)]
#[command(name = "dobc", version, about = "Disturbance-observer control of an islanded PV-diesel microgrid")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration layered over the selected profile.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base profile name (built-in or `<profile-dir>/<name>.toml`).
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Directory searched for profiles before the built-ins.
    #[arg(long, global = true, env = PROFILE_DIR_ENV)]
    profile_dir: Option<PathBuf>,
    /// Scenario case: avr-a, avr-b, lfc-a, lfc-b, lfc-c or lfc-d.
    #[arg(long, global = true)]
    case: Option<String>,
    /// Seed for the load-noise generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Integration step, s.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Simulated time, s.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case and write its trace, plots and performance report.
    Simulate {
        /// Run the baseline controller only.
        #[arg(long)]
        no_observer: bool,
    },
    /// Evaluate the frequency loop over a grid of uncertainty budgets.
    Sweep {
        /// CSV with columns zeta_l_pv, zeta_u_pv, zeta_l_L, zeta_u_L.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Sweep the baseline controller only.
        #[arg(long)]
        no_observer: bool,
    },
    /// Frequency response of a filter, plant or observer branch.
    Bode {
        /// What to analyse.
        #[arg(long, value_enum, default_value = "q")]
        target: BodeTarget,
        /// Filter time constants (comma separated); defaults to the standard sweep.
        #[arg(long, value_delimiter = ',')]
        lambda: Option<Vec<f64>>,
        /// Filter order.
        #[arg(long, default_value_t = 4)]
        order: usize,
        /// Lowest frequency, rad/s.
        #[arg(long, default_value_t = 0.01)]
        omega_min: f64,
        /// Highest frequency, rad/s.
        #[arg(long, default_value_t = 1e4)]
        omega_max: f64,
        /// Log-spaced frequency points.
        #[arg(long, default_value_t = 400)]
        points: usize,
        /// Frequency at which the filter summary reports gain and phase.
        #[arg(long, default_value_t = 0.1)]
        probe: f64,
    },
    /// Fit a second-order plant to input/output data.
    Sysid {
        /// CSV with columns t (or time), u, y.
        #[arg(long, conflicts_with = "synthetic")]
        data: Option<PathBuf>,
        /// Generate data from the profile's hardware plant.
        #[arg(long)]
        synthetic: bool,
        /// Also check closure of an integral controller with this gain.
        #[arg(long)]
        ki: Option<f64>,
        /// State-variable-filter bandwidth, rad/s.
        #[arg(long)]
        filter_bandwidth: Option<f64>,
    },
    /// Compare baseline and observer-augmented control across cases.
    Report {
        /// Run every case instead of the configured one.
        #[arg(long)]
        all: bool,
    },
    /// Print the fully resolved configuration.
    Config,
    /// List the built-in profiles.
    Profiles,
}

fn load(common: &Common) -> Result<Config, CliError> {
    let overrides = Overrides {
        case: common.case.clone(),
        seed: common.seed,
        dt: common.dt,
        horizon: common.horizon,
        workers: common.workers,
    };
    let dir = profile_dir(common.profile_dir.clone());
    let cfg = resolve(common.config.as_deref(), common.profile.as_deref(), dir.as_deref(), &overrides)?;
    commands::check_hardware(&cfg)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Command::Profiles = cli.command {
        return Ok(config::builtin_profiles().map(|p| format!("{p}\n")).collect());
    }
    let cfg = load(&cli.common)?;
    let out = &cli.common.out;
    match cli.command {
        Command::Simulate { no_observer } => commands::simulate(&cfg, &commands::SimulateArgs { no_observer }, out),
        Command::Sweep { grid, no_observer } => {
            commands::sweep(&cfg, &commands::SweepArgs { grid: grid.as_deref(), no_observer }, out)
        }
        Command::Bode { target, lambda, order, omega_min, omega_max, points, probe } => commands::bode(
            &cfg,
            &commands::BodeArgs { target, lambdas: lambda, order, omega_min, omega_max, points, probe },
            out,
        ),
        Command::Sysid { data, synthetic, ki, filter_bandwidth } => {
            commands::sysid(&cfg, &commands::SysidArgs { data: data.as_deref(), synthetic, ki, filter_bandwidth }, out)
        }
        Command::Report { all } => {
            let cases = if all { CaseId::ALL.to_vec() } else { vec![cfg.case()?] };
            commands::report(&cfg, &cases, out)
        }
        Command::Config => Ok(cfg.to_toml()),
        Command::Profiles => unreachable!("handled before loading"),
    }
}

/// Exit code, stdout text and stderr text for one invocation.
struct Outcome {
    code: u8,
    stdout: String,
    stderr: String,
}

fn execute<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            return if code == 0 {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    match run(cli) {
        Ok(stdout) => Outcome { code: 0, stdout, stderr: String::new() },
        Err(e) => Outcome { code: e.exit_code() as u8, stdout: String::new(), stderr: format!("error: {e}\n") },
    }
}

fn main() -> ExitCode {
    let o = execute(std::env::args_os());
    print!("{}", o.stdout);
    eprint!("{}", o.stderr);
    ExitCode::from(o.code)
}

#[cfg(test)]
mod tests;
