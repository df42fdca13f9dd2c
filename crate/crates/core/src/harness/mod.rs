//! Experiment plumbing: config files, seeded repeats, and the CSV/JSON
//! artifacts each run leaves behind.

mod config;
mod export;
mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::federation::FederationError;

pub use config::{
    DatasetSource, ExperimentConfig, PartitionRule, DEFAULT_DIRICHLET_ALPHA,
    DEFAULT_LABELS_PER_CLIENT, DEFAULT_REPEATS, DEFAULT_SYNTH,
};
pub use export::{export_relevance_heatmap, write_matrix_csv, write_rounds_csv, ROUNDS_CSV_HEADER};
pub use run::{
    build_inputs, describe_idx, prepare_output_dir, resolve_output_root, run_experiment,
    run_single, AlgorithmSummary, ExperimentSummary, RunOptions, RunSummary, OUTPUT_ROOT_ENV,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}{}: {message}", key.as_ref().map(|k| format!(" (`{k}`)")).unwrap_or_default())]
    Parse {
        line: usize,
        key: Option<String>,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output directory {} is not empty (pass --force to write into it)", .0.display())]
    OutputExists(PathBuf),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl HarnessError {
    /// 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::OutputExists(_) => 1,
            HarnessError::Federation(FederationError::Config(_)) => 1,
            _ => 2,
        }
    }

    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> HarnessError {
        let context = context.into();
        move |source| HarnessError::Io { context, source }
    }
}
