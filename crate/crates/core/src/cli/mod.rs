//! Command-line front end.
//!
//! Every run reads one versioned JSON [`RunConfig`], writes `summary.json` and
//! one file per table into the output directory, and exits with
//! `0` (ok), `2` (parse or validation error), `3` (refused input),
//! `4` (non-convergence or failed certificate) or `1` (I/O failure).

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, ConfigError, RunConfig, Task, SCHEMA_VERSION};
pub use output::{write_artifact, Artifact, Format, Meta, Table};

use crate::error::Error;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "MFREP_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    Io = 1,
    Parse = 2,
    Refused = 3,
    Failed = 4,
}

impl ExitCode {
    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Invalid(_) | Error::Refused(_) | Error::Mismatch(_) => ExitCode::Refused,
            Error::NotConverged(_) | Error::OrderViolation(_) => ExitCode::Failed,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mfrep", version, about = "Running-maximum representations, optimizers and mean-field fixed points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `MFREP_OUT` and the configured directory).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for randomized fixtures (overrides the configured seed).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Cross-check the representation against the brute-force oracle.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Encoding of tabular outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Solve one representation problem.
    Represent,
    /// Mean-field game of timing.
    MfgTiming,
    /// Mean-field game of monotone-follower control.
    MfgSingular,
    /// Mean-field game of optimal consumption.
    MfgConsumption,
    /// Fixed point of the reference interaction adapter.
    FixedPoint,
    /// Stability sweep of a perturbation family.
    Stability,
    /// Lévy, Lévy–Prokhorov and stochastic-order queries.
    Metrics,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Represent => "represent",
            Command::MfgTiming => "mfg-timing",
            Command::MfgSingular => "mfg-singular",
            Command::MfgConsumption => "mfg-consumption",
            Command::FixedPoint => "fixed-point",
            Command::Stability => "stability",
            Command::Metrics => "metrics",
        }
    }
}

/// Outcome of [`run`]: the exit code and a one-line message for stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub code: ExitCode,
    pub message: String,
    pub files: Vec<String>,
}

impl RunOutcome {
    fn fail(code: ExitCode, message: String) -> Self {
        RunOutcome { code, message, files: vec![] }
    }
}

/// Execute a parsed command line. `env_out` is the value of [`OUT_ENV`], if set.
pub fn run(cli: &Cli, env_out: Option<PathBuf>) -> RunOutcome {
    let Some(path) = &cli.common.config else {
        return RunOutcome::fail(ExitCode::Parse, "--config: a configuration file is required".into());
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return RunOutcome::fail(ExitCode::Parse, format!("{}: {e}", path.display())),
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return RunOutcome::fail(ExitCode::Parse, format!("{}: {e}", path.display())),
    };
    if cfg.task.command() != cli.command.name() {
        return RunOutcome::fail(
            ExitCode::Parse,
            format!("{}: task.command is `{}` but `{}` was invoked", path.display(), cfg.task.command(), cli.command.name()),
        );
    }
    if let Some(s) = cli.common.seed {
        cfg.seed = Some(s);
    }
    let seed = match cfg.require_seed() {
        Ok(s) => s,
        Err(e) => return RunOutcome::fail(ExitCode::Parse, format!("{}: {e}", path.display())),
    };
    let out = cli
        .common
        .out
        .clone()
        .or(env_out)
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mfrep-out"));
    let canonical = match serde_json::to_vec(&cfg) {
        Ok(v) => v,
        Err(e) => return RunOutcome::fail(ExitCode::Parse, format!("cannot canonicalize config: {e}")),
    };
    let mut meta = Meta::new(cfg.task.command(), &canonical);
    if cli.common.oracle {
        meta.command.push_str(" --oracle");
    }
    let artifact = match commands::run_task(&cfg, seed, cli.common.oracle) {
        Ok(a) => a,
        Err(e) => return RunOutcome::fail(ExitCode::from_error(&e), e.to_string()),
    };
    match write_artifact(&out, &meta, &artifact, cli.common.format) {
        Ok(files) => {
            let (code, message) = if artifact.passed {
                (ExitCode::Ok, format!("{}: ok, wrote {} files to {}", meta.command, files.len(), out.display()))
            } else {
                (
                    ExitCode::Failed,
                    format!("{}: not converged or certificate failed; see {}", meta.command, out.display()),
                )
            };
            RunOutcome { code, message, files }
        }
        Err(e) => RunOutcome::fail(ExitCode::Io, format!("{}: {e}", out.display())),
    }
}
