//! `sot`: dataset generation, loss sweeps, per-signal estimation, variant
//! studies and self-checks.
//!
//! Exit status is 0 on success, 1 on a usage or configuration error and 2
//! when a run fails.

mod commands;
mod config;
mod provenance;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sot_core::Variant;

#[derive(Debug, Parser)]
#[command(name = "sot", version, about = "Spectral optimal transport toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic harmonic dataset (WAV files and manifest).
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate normalized losses between a sinusoid and shifted copies.
    Sweep {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Estimate pitch and harmonic amplitudes of one WAV file.
    Estimate {
        #[arg(long)]
        wav: PathBuf,
        /// Variant name, e.g. SOT-2048, MSS-Lin, SOT-512-LogF.
        #[arg(long)]
        variant: Variant,
        /// Overrides SOT_SEED and the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured step budget.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Estimate a dataset split with several variants and seeds and
    /// summarize the metrics.
    Study {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of logical cores.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the oracle and property checks and print one line per check.
    Validate {
        /// Also write the report and a run record here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<sot_core::Error> for CliError {
    fn from(e: sot_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { config, out } => commands::gen_data(&config, &out),
        Command::Sweep { out, config } => commands::sweep(&out, config.as_deref()),
        Command::Estimate {
            wav,
            variant,
            seed,
            out,
            config,
            steps,
        } => commands::estimate(&commands::EstimateArgs {
            wav,
            variant,
            seed,
            out,
            config,
            steps,
        }),
        Command::Study { config, out, jobs } => commands::study(&config, &out, jobs),
        Command::Validate { out } => commands::validate(out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
