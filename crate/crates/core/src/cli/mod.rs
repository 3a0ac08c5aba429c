//! Command-line front end.
//!
//! ```text
//! phase-align run    [--config <path>] --out <dir> [--snr-db <x>]
//! phase-align verify [--max-n <k>] [--seed <s>]
//! ```
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or config error,
//! 3 I/O error.

mod run;
mod verify;

use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub use run::{cmd_run, load_config, parse_config, write_outputs, RunManifest, RunSummary};
pub use verify::{cmd_verify, cmd_verify_with, CheckResult, VerifyReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("verification failed: {}", .0.join(", "))]
    VerificationFailed(Vec<String>),
    #[error("{0}")]
    Internal(#[from] crate::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) | Self::Internal(_) => EXIT_USAGE,
            Self::Io(_) => EXIT_IO,
            Self::VerificationFailed(_) => EXIT_VERIFY_FAILED,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "phase-align",
    version,
    about = "Blind RIS phase alignment from power measurements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte-Carlo experiment and write curve.csv, cdf.csv, manifest.json.
    Run {
        /// JSON experiment config; omitted fields take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
        /// Overrides `snr_db` from the config.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
    },
    /// Cross-check the solver and optimizer against independent references.
    Verify {
        /// Largest element count for brute-force checks (at most 3).
        #[arg(long, default_value_t = 3)]
        max_n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            snr_db,
        } => cmd_run(config.as_deref(), &out, snr_db).map(|manifest| {
            for path in [
                &manifest.outputs.curve,
                &manifest.outputs.cdf,
                &manifest.outputs.manifest,
            ] {
                println!("wrote {path}");
            }
        }),
        Command::Verify { max_n, seed } => {
            let mut stdout = std::io::stdout();
            cmd_verify(max_n, seed, &mut stdout).map(|_| ())
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
