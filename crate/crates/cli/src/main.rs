//! Command-line driver for the keystone super-resolution pipeline.
//!
//! Three subcommands cover the workflow end to end: `synth` renders a
//! synthetic acquisition to disk, `run` executes restore -> register ->
//! solve -> fuse on an existing dataset, and `compare` scores
//! reconstruction variants against a known truth. Every subcommand reads a
//! flat `[section] key=value` config file and writes its outputs plus a
//! `manifest.txt` recording the effective parameters and input hashes.
//!
//! Exit codes tell the caller which class of failure occurred:
//! 0 success, 2 configuration, 3 I/O, 4 numerical.

mod cmd_compare;
mod cmd_run;
mod cmd_synth;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use keysr_core::error::Error;

// ---------------------------------------------------------------------------
// Argument surface
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(name = "keysr", version, about = "Keystone-aware hyperspectral super-resolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic pushbroom acquisition (cube, truth, keystone table).
    Synth {
        /// Scene description config file.
        #[arg(long)]
        config: PathBuf,
        /// Directory to write the dataset into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Restore, register, super-resolve, and fuse an acquired dataset.
    Run {
        /// Pipeline config file naming the input cube and keystone table.
        #[arg(long)]
        config: PathBuf,
        /// Directory to write results into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Feed the observed channels to the solver without per-band restoration.
        #[arg(long)]
        skip_restore: bool,
        /// Commit every solver step even when the cost rises (the published
        /// schedule); the default rolls back and retries with a smaller step.
        #[arg(long)]
        no_step_revert: bool,
    },
    /// Reconstruct one synthetic scene with several method variants and report.
    Compare {
        /// Scene plus method-grid config file.
        #[arg(long)]
        config: PathBuf,
        /// Directory to write the report into (created if missing).
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        /// Override the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
}

// ---------------------------------------------------------------------------
// Failure reporting
// ---------------------------------------------------------------------------

/// An error tagged with the pipeline stage that raised it, so the console
/// message tells the operator where to look before they open any logs.
pub struct StageError {
    pub stage: &'static str,
    pub err: Error,
}

impl StageError {
    pub fn new(stage: &'static str, err: Error) -> Self {
        StageError { stage, err }
    }
}

/// Tag the error side of a core result with a stage name.
pub trait Stage<T> {
    fn stage(self, name: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for keysr_core::error::Result<T> {
    fn stage(self, name: &'static str) -> Result<T, StageError> {
        self.map_err(|err| StageError::new(name, err))
    }
}

/// Map an error to the process exit code class. Config mistakes (2) are
/// fixable by editing the config, I/O failures (3) by fixing the files, and
/// numerical failures (4) usually mean degenerate input data.
fn exit_class(err: &Error) -> u8 {
    match err {
        Error::Parse { .. }
        | Error::UnsupportedFormat(_)
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::ShiftTable { .. } => 2,
        Error::Io { .. } | Error::SizeMismatch { .. } => 3,
        Error::NonFinite { .. }
        | Error::NumericalFailure { .. }
        | Error::ZeroVariance { .. }
        | Error::DegenerateRadiance { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, output_dir, seed } => {
            cmd_synth::run(&config, &output_dir, seed)
        }
        Command::Run { config, output_dir, skip_restore, no_step_revert } => {
            cmd_run::run(&config, &output_dir, skip_restore, no_step_revert)
        }
        Command::Compare { config, output_dir, seed } => {
            cmd_compare::run(&config, &output_dir, seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(StageError { stage, err }) => {
            eprintln!("keysr: stage {}: {}", stage, err);
            ExitCode::from(exit_class(&err))
        }
    }
}
