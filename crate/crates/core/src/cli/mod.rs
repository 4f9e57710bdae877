//! Command-line front end: `run`, `sweep` and `check`.
//!
//! Exit codes: 0 success, 1 failed self test, 2 configuration error,
//! 3 numerical or output failure.

mod check;
mod input;
mod output;
mod sweep;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use check::{run_checks, CheckOutcome, Fault};
pub use input::{
    apply_override, load_scenario, locate_key, parse_scenario, Axis, Scenario, SweepSection,
};
pub use output::{aggregate, mean_std, AggregateRow, Db, ResultRecord, SCHEMA};
pub use sweep::{
    run_architecture, run_sweep, thread_count, trace_id, write_sweep, Architecture, AxisValue,
    RunOutput, SweepSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] crate::Error),
    #[error("cannot write {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) | CliError::Output(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "bdris",
    version,
    about = "Scattering-matrix design for RIS-assisted radar/communication systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one channel realization and write its record and trace.
    Run {
        /// Scenario file (TOML).
        config: PathBuf,
        /// Override a config value, e.g. `--set design.beta=0.1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Trial index of the channel draw.
        #[arg(long, default_value_t = 0)]
        trial: u64,
        /// bdris, dris, bdris-M, dris-continuous, no-ris or random.
        #[arg(long, default_value = "bdris")]
        architecture: String,
        /// Output directory.
        #[arg(long, default_value = "bdris-run")]
        out: PathBuf,
    },
    /// Run a Monte-Carlo sweep described by the `[sweep]` table of a scenario.
    Sweep {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides `sweep.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in identity and optimality checks.
    Check {
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn main_with_args<I, T, O, E>(args: I, out: &mut O, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    O: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    execute(cli, out, err)
}

pub fn execute<O: Write, E: Write>(cli: Cli, out: &mut O, err: &mut E) -> i32 {
    let result = match cli.command {
        Command::Run {
            config,
            set,
            trial,
            architecture,
            out: dir,
        } => cmd_run(&config, &set, trial, &architecture, &dir, out),
        Command::Sweep {
            spec,
            set,
            out: dir,
        } => cmd_sweep(&spec, &set, dir, out),
        Command::Check { inject_fault } => return cmd_check(inject_fault.as_deref(), out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn cmd_run<O: Write>(
    config: &std::path::Path,
    set: &[String],
    trial: u64,
    architecture: &str,
    dir: &std::path::Path,
    out: &mut O,
) -> Result<(), CliError> {
    let scenario = load_scenario(config, set)?;
    if scenario.sweep.is_some() {
        // checked so that a broken sweep table is reported even here
        SweepSpec::from_scenario(&scenario, None)?;
    }
    let cfg = &scenario.system;
    let arch = Architecture::parse(architecture, cfg.design.resolution)
        .map_err(|e| CliError::Config(format!("--architecture: {e}")))?;
    let start = Instant::now();
    let channels = crate::channel::sample_channels(cfg, trial)?;
    let run = run_architecture(cfg, &channels, arch)?;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    let id = trace_id(None, &run.record.architecture, trial);
    let mut json = run.record.to_json();
    json["wall_time_seconds"] = serde_json::json!(start.elapsed().as_secs_f64());
    json["trace_file"] = serde_json::json!(format!("trace-{id}.csv"));
    output::write_json(&dir.join("record.json"), &json)?;
    output::write_trace(&dir.join(format!("trace-{id}.csv")), &run.trace)?;
    let r = &run.record;
    let _ = writeln!(
        out,
        "{} trial {}: snr_t {:.6e} (snr_c {:.6e}, snr_r {:.6e}), {} outer iterations, converged {}",
        r.architecture, r.trial_index, r.snr_t, r.snr_c, r.snr_r, r.outer_iterations, r.converged
    );
    let _ = writeln!(out, "wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep<O: Write>(
    path: &std::path::Path,
    set: &[String],
    dir: Option<PathBuf>,
    out: &mut O,
) -> Result<(), CliError> {
    let scenario = load_scenario(path, set)?;
    let spec = SweepSpec::from_scenario(&scenario, dir.as_deref())?;
    let runs = run_sweep(&spec)?;
    write_sweep(&spec, &runs)?;
    let records: Vec<ResultRecord> = runs.iter().map(|r| r.record.clone()).collect();
    for row in aggregate(&records) {
        let _ = writeln!(
            out,
            "{}={} {}: snr_t {:.4e}, snr_c {:.4e}, snr_r {:.4e} over {} trials",
            row.axis,
            row.value,
            row.architecture,
            row.snr_t_mean,
            row.snr_c_mean,
            row.snr_r_mean,
            row.count
        );
    }
    let _ = writeln!(out, "wrote {}", spec.output_dir.display());
    Ok(())
}

fn cmd_check<O: Write, E: Write>(fault: Option<&str>, out: &mut O, err: &mut E) -> i32 {
    let fault = match fault.map(str::parse::<Fault>).transpose() {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let outcomes = match run_checks(fault) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: numerical failure: {e}");
            return EXIT_FAILURE;
        }
    };
    for c in &outcomes {
        let _ = writeln!(
            out,
            "{} {:<22} residual {:.3e} (tolerance {:.0e})",
            if c.passed() { "pass" } else { "FAIL" },
            c.name,
            c.residual,
            c.tolerance
        );
    }
    let failed: Vec<&CheckOutcome> = outcomes.iter().filter(|c| !c.passed()).collect();
    if failed.is_empty() {
        EXIT_OK
    } else {
        for c in failed {
            let _ = writeln!(
                err,
                "check failed: {} (residual {:.3e})",
                c.name, c.residual
            );
        }
        EXIT_CHECK_FAILED
    }
}
