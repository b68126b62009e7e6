//! Batch experiment driver behind the `relu-spectra` binary: train, probe
//! (layer bound curves, mean-width traces, correct-vs-incorrect splits),
//! prune, and report emission.
//!
//! Every command is a library function taking an [`ExperimentConfig`], so
//! the binary stays a thin argument parser and tests can drive the full
//! pipeline in-process.

pub mod config;
mod commands;
pub mod report;

pub use commands::{cmd_gmw, cmd_prune, cmd_report, cmd_rsv, cmd_train};
pub use config::ExperimentConfig;

use thiserror::Error;

use crate::datasets::DataError;
use crate::linalg::LinalgError;
use crate::meanwidth::{simplex::SimplexError, MeanWidthError};
use crate::nnet::NnetError;
use crate::pruning::PruneError;
use crate::spectra::SpectraError;

/// Driver-level error, bucketed by process exit code: usage errors exit 1,
/// data errors 2, numeric failures 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<LinalgError> for CliError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SvdNonConvergence { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SpectraError> for CliError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::OptimizerDiverged { .. } => CliError::Numeric(e.to_string()),
            SpectraError::Linalg(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnetError> for CliError {
    fn from(e: NnetError) -> Self {
        match e {
            NnetError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            NnetError::Linalg(inner) => inner.into(),
            NnetError::Spectra(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::Nnet(inner) => inner.into(),
            PruneError::Linalg(inner) => inner.into(),
            PruneError::Data(inner) => inner.into(),
            PruneError::AllLayersExhausted => CliError::Data(e.to_string()),
        }
    }
}

impl From<SimplexError> for CliError {
    fn from(e: SimplexError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<MeanWidthError> for CliError {
    fn from(e: MeanWidthError) -> Self {
        match e {
            MeanWidthError::Linalg(inner) => inner.into(),
            MeanWidthError::Simplex(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Dispatch a subcommand by name.
pub fn run(command: &str, cfg: &ExperimentConfig) -> Result<(), CliError> {
    match command {
        "train" => cmd_train(cfg),
        "rsv" => cmd_rsv(cfg),
        "gmw" => cmd_gmw(cfg),
        "prune" => cmd_prune(cfg),
        "report" => cmd_report(cfg),
        other => Err(CliError::Usage(format!(
            "unknown command {other:?}; expected train|rsv|gmw|prune|report"
        ))),
    }
}
