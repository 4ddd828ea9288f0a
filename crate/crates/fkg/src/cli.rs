//! Argument parsing and dispatch for the `fkg` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde_json::json;

use crate::commands::{self, CliError, Subcommand};
use crate::config::{load_config, EnvOverrides, Experiment};
use crate::exec::RayonExecutor;
use crate::output::{write_report, Report, RowBuilder};
use crate::selftest::{run_all, SelftestOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Kernel,
    Bounds,
    Green,
    Scaling,
    Moments,
    Position,
    Metric,
    Selftest,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Kernel => Subcommand::Kernel,
            Command::Bounds => Subcommand::Bounds,
            Command::Green => Subcommand::Green,
            Command::Scaling => Subcommand::Scaling,
            Command::Moments => Subcommand::Moments,
            Command::Position => Subcommand::Position,
            Command::Metric => Subcommand::Metric,
            Command::Selftest => Subcommand::Selftest,
        }
    }
}

/// Feynman-Kac kernels, Jensen bounds and Green's functions for
/// singular second-order operators.
///
/// Environment: FKG_SEED overrides mc.seed, FKG_THREADS sets the worker
/// count. Exit codes: 0 ok, 1 invalid input, 2 numerical failure,
/// 3 failed selftest.
#[derive(Debug, Parser)]
#[command(name = "fkg", version)]
pub struct Cli {
    pub command: Command,
    /// JSON experiment config.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Dot-path assignment into the config, e.g. mc.n_paths=2000.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory; defaults to output.dir of the config.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn selftest(exec_threads: usize, ex: &Experiment, out: &mut dyn Write) -> (Report, bool) {
    let opts = SelftestOptions {
        seed: ex.seed,
        threads: exec_threads,
    };
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    let results = run_all(&opts, |r| {
        let _ = writeln!(out, "{}", r.line());
    });
    let mut all = true;
    for r in &results {
        all &= r.pass;
        let inputs = json!({
            "criterion": r.id,
            "title": r.title,
            "measured": r.measured,
            "expected": r.expected,
            "seconds": r.seconds,
        });
        report.rows.push(rb.row(
            "selftest",
            inputs,
            if r.pass { 1.0 } else { 0.0 },
            None,
            if r.pass { "pass" } else { "fail" },
            None,
        ));
    }
    let passed = results.iter().filter(|r| r.pass).count();
    report.summary.push(format!("{passed}/{} criteria passed", results.len()));
    (report, all)
}

fn execute(cli: &Cli, env: &EnvOverrides, out: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(&cli.config, &cli.overrides)?;
    let ex = Experiment::resolve(config, env)?;
    let threads = env.threads.unwrap_or(0);
    let exec = RayonExecutor::new(threads)
        .map_err(|e| crate::config::ValidationError::new("FKG_THREADS", e.to_string()))?;
    let mut failed = None;
    let report = match Subcommand::from(cli.command) {
        Subcommand::Kernel => commands::kernel(&exec, &ex)?,
        Subcommand::Bounds => commands::bounds(&ex)?,
        Subcommand::Green => commands::green(&exec, &ex)?,
        Subcommand::Scaling => commands::scaling(&exec, &ex)?,
        Subcommand::Moments => commands::moments(&exec, &ex)?,
        Subcommand::Position => commands::position(&ex)?,
        Subcommand::Metric => commands::metric(&ex)?,
        Subcommand::Selftest => {
            let (report, all) = selftest(threads, &ex, out);
            if !all {
                failed = Some(report.summary.join("; "));
            }
            report
        }
    };
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&ex.config.output.dir));
    let written = write_report(&dir, &ex.config.output.csv, ex.config.output.plots, &report)?;
    for line in &report.summary {
        let _ = writeln!(out, "{line}");
    }
    for path in &written {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    match failed {
        Some(msg) => Err(CliError::Selftest(msg)),
        None => Ok(()),
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, env: &EnvOverrides, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli, env, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
