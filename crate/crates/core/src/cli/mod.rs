//! The `lsn` command line: dataset generation, training, sweeps, evaluation,
//! pattern export and gradient certification.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a check failed,
//! 3 runtime failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{DataSection, RunConfig, SweepSection, TOOL_VERSION};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CHECK: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lsn", version, about = "Learned sensing: jointly optimized LED illumination, pupil and classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Experiment configuration (TOML). Desk-scale defaults when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the synthetic triangle/rectangle dataset.
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        /// Output directory (default: data.dir from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train one regime with one seed.
    Train {
        #[command(flatten)]
        config: ConfigArg,
        /// DO, PO, IO or PIO.
        #[arg(long)]
        regime: String,
        /// Overrides train.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root (default: sweep.out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Train every configured regime over several seeds and write summary.csv.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Rerun even if the output directory already holds a sweep.
        #[arg(long)]
        force: bool,
        /// Continue an interrupted sweep with the same config, reusing finished runs.
        #[arg(long, conflicts_with = "force")]
        resume: bool,
    },
    /// Re-evaluate a saved run on one split.
    Eval {
        #[command(flatten)]
        config: ConfigArg,
        /// Run directory holding run.json and checkpoint/.
        #[arg(long)]
        run: PathBuf,
        /// train, val or test.
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Export pupil mean/variance, LED weights and example sensor images.
    ExportPatterns {
        #[command(flatten)]
        config: ConfigArg,
        /// A run directory, a regime directory of seed runs, or a sweep output directory.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify the analytic gradients against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Test hook: multiply analytic gradients by this factor.
        #[arg(long, default_value_t = 1.0)]
        fault_scale: f64,
        /// Skip the end-to-end check through the classifier.
        #[arg(long)]
        no_end_to_end: bool,
        /// Also write the CSV report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self { code: EXIT_CHECK, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::NotFound(_) | Error::Validation(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Self { code, message: e.to_string() }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    use commands::*;
    match cli.command {
        Command::GenData { config, out, force } => gen_data(&load_config(&config)?, out, force),
        Command::Train { config, regime, seed, out, force } => {
            let regime = regime.parse().map_err(|e: Error| CliError::usage(e.to_string()))?;
            train(&load_config(&config)?, regime, seed, out, force)
        }
        Command::Sweep { config, force, resume } => sweep(&load_config(&config)?, force, resume),
        Command::Eval { config, run, split } => eval(&load_config(&config)?, &run, &split),
        Command::ExportPatterns { config, run, out } => export_patterns(&load_config(&config)?, &run, &out),
        Command::Gradcheck { instances, seed, fault_scale, no_end_to_end, report } => {
            gradcheck(instances, seed, fault_scale, !no_end_to_end, report.as_deref())
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig, CliError> {
    match &arg.config {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}
