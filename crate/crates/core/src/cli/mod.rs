//! Command-line front end: `simulate`, `run`, `sweep` and `verify`.

mod config;
pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{RunConfig, SweepConfig};
pub use verify::{Level, PropertyResult};

use crate::error::{Error, Result};
use crate::errorstate::{self, InjectionMode};
use crate::ins::EarthModel;
use crate::sim::{self, RunOutcome, SweepTable};

/// Environment variable that switches on a deliberate defect, for checking
/// that `verify` notices it.
pub const FAULT_ENV: &str = "CTESKF_FAULT";
/// Environment variable with the log filter (`error`, `info`, `debug`, ...).
pub const LOG_ENV: &str = "CTESKF_LOG";

/// Exit code for a completed command whose result is bad: a diverged filter
/// or a failed property.
pub const EXIT_FAILED_CHECK: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cteskf", version, about = "Error-state Kalman filters for ECEF inertial navigation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a trajectory and write IMU, observation and truth CSV files.
    Simulate(CommonArgs),
    /// Run the configured filter variants on a simulated or recorded dataset.
    Run(RunArgs),
    /// Monte Carlo sweep over initial yaw errors.
    Sweep(SweepArgs),
    /// Check the numerical identities the filters rely on.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration; defaults apply to anything it leaves out.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides output.dir).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Noise seed (overrides scenario.seed).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Update injection (overrides filter.injection).
    #[arg(long, value_parser = parse_injection)]
    pub injection: Option<InjectionMode>,
    /// Replay this dataset directory instead of simulating (overrides input.dataset).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_parser = parse_injection)]
    pub injection: Option<InjectionMode>,
    /// Worker threads (overrides sweep.jobs).
    #[arg(long, short)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "fast")]
    pub level: Level,
    /// Also write the results to `verify.csv` in this directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_injection(s: &str) -> std::result::Result<InjectionMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.output = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the simulated dataset; returns the directory.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let earth = EarthModel::default();
    let ds = sim::simulate(&cfg.scenario, &earth)?;
    log::info!(
        "simulated {} IMU samples, {} GNSS and {} odometer observations",
        ds.imu.len(),
        ds.gnss.len(),
        ds.odo.len()
    );
    ensure_dir(&cfg.output)?;
    sim::write_dataset(&ds, &cfg.output)?;
    Ok(cfg.output.clone())
}

const SUMMARY_HEADER: [&str; 11] = [
    "variant",
    "status",
    "att_rmse_deg",
    "roll_rmse_deg",
    "pitch_rmse_deg",
    "yaw_rmse_deg",
    "vel_rmse",
    "pos_rmse",
    "final_roll_deg",
    "final_pitch_deg",
    "final_yaw_deg",
];

fn summary_rows(outcomes: &[RunOutcome]) -> Vec<Vec<String>> {
    outcomes
        .iter()
        .map(|o| {
            let m = &o.metrics;
            let status = if o.diverged.is_some() { "diverged" } else { "ok" };
            [o.variant.name().to_string(), status.to_string()]
                .into_iter()
                .chain(
                    [
                        m.att_rmse_total,
                        m.att_rmse.x,
                        m.att_rmse.y,
                        m.att_rmse.z,
                        m.vel_rmse,
                        m.pos_rmse,
                        m.final_att_err.x,
                        m.final_att_err.y,
                        m.final_att_err.z,
                    ]
                    .map(|v| format!("{v}")),
                )
                .collect()
        })
        .collect()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let wrap = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every configured variant and writes one estimate file per variant
/// plus `summary.csv`.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<RunOutcome>> {
    let earth = EarthModel::default();
    let ds = match &cfg.dataset {
        Some(dir) => sim::replay_dataset(dir)?,
        None => sim::simulate(&cfg.scenario, &earth)?,
    };
    let outcomes = sim::run_dataset(&ds, &cfg.scenario, &cfg.filter, &earth)?;
    ensure_dir(&cfg.output)?;
    for o in &outcomes {
        sim::write_estimates(cfg.output.join(format!("estimates_{}.csv", o.variant.name())), &o.series)?;
        match &o.diverged {
            Some(why) => log::warn!("{} diverged: {why}", o.variant),
            None => log::info!("{}: attitude RMSE {:.3} deg", o.variant, o.metrics.att_rmse_total),
        }
    }
    write_csv(&cfg.output.join("summary.csv"), &SUMMARY_HEADER, &summary_rows(outcomes.as_slice()))?;
    Ok(outcomes)
}

/// Runs the yaw sweep and writes `rmse.csv`.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<SweepTable> {
    let grid = cfg.sweep.grid()?;
    let earth = EarthModel::default();
    log::info!("sweep over {} cells x {} seeds on {} threads", grid.len(), cfg.sweep.seeds, cfg.sweep.jobs);
    let table = sim::monte_carlo_sweep(&cfg.scenario, &cfg.filter, &grid, cfg.sweep.seeds, cfg.sweep.jobs, &earth)?;
    ensure_dir(&cfg.output)?;
    sim::write_sweep(cfg.output.join("rmse.csv"), &table)?;
    Ok(table)
}

/// Runs the property suite, printing each line as it completes.
pub fn cmd_verify(level: Level, out: Option<&Path>, sink: &mut dyn Write) -> Result<Vec<PropertyResult>> {
    if let Some(dir) = out {
        ensure_dir(dir)?;
    }
    let io_err = |e| Error::io("<stdout>", e);
    writeln!(sink, "{}", PropertyResult::HEADER).map_err(io_err)?;
    let mut write_err = None;
    let results = verify::run_properties(level, |r| {
        if let Err(e) = writeln!(sink, "{r}").and_then(|_| sink.flush()) {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(io_err(e));
    }
    if let Some(dir) = out {
        let path = dir.join("verify.csv");
        let text: String = std::iter::once(PropertyResult::HEADER.to_string())
            .chain(results.iter().map(|r| r.to_string()))
            .map(|l| l + "\n")
            .collect();
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(results)
}

fn apply_fault_env() -> Result<()> {
    match std::env::var(FAULT_ENV).as_deref() {
        Err(_) | Ok("") => Ok(()),
        Ok("flip-t-ekf-r") => {
            log::warn!("{FAULT_ENV}: sign fault in the EKF to right-invariant transformation is active");
            errorstate::set_sign_fault(true);
            Ok(())
        }
        Ok(other) => Err(Error::Config(format!("{FAULT_ENV}: unknown fault '{other}' (known: flip-t-ekf-r)"))),
    }
}

fn print_summary(outcomes: &[RunOutcome]) {
    // a closed pipe is not worth a panic
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{:<8} {:>9} {:>10} {:>10} {:>10}", "variant", "status", "att [deg]", "vel [m/s]", "pos [m]");
    for o in outcomes {
        let m = &o.metrics;
        let status = if o.diverged.is_some() { "diverged" } else { "ok" };
        let _ = writeln!(
            out,
            "{:<8} {:>9} {:>10.3} {:>10.3} {:>10.3}",
            o.variant.name(),
            status,
            m.att_rmse_total,
            m.vel_rmse,
            m.pos_rmse
        );
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    apply_fault_env()?;
    match cli.command {
        Command::Simulate(args) => {
            let cfg = resolve_config(&args)?;
            let dir = cmd_simulate(&cfg)?;
            log::info!("dataset written to {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let mut cfg = resolve_config(&args.common)?;
            if let Some(mode) = args.injection {
                cfg.filter.injection = mode;
            }
            if let Some(dir) = args.dataset {
                cfg.dataset = Some(dir);
            }
            let outcomes = cmd_run(&cfg)?;
            print_summary(&outcomes);
            Ok(if outcomes.iter().any(|o| o.diverged.is_some()) {
                ExitCode::from(EXIT_FAILED_CHECK)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Sweep(args) => {
            let mut cfg = resolve_config(&args.common)?;
            if let Some(mode) = args.injection {
                cfg.filter.injection = mode;
            }
            if let Some(jobs) = args.jobs {
                if jobs == 0 {
                    return Err(Error::Config("--jobs must be at least 1".into()));
                }
                cfg.sweep.jobs = jobs;
            }
            let table = cmd_sweep(&cfg)?;
            log::info!("{} cells written to {}", table.yaw.len(), cfg.output.join("rmse.csv").display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(args) => {
            let results = cmd_verify(args.level, args.out.as_deref(), &mut std::io::stdout().lock())?;
            Ok(if results.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILED_CHECK) })
        }
    }
}

/// Entry point of the binary: 0 on success, 1 on errors, 2 when a run
/// diverged or a property failed.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
