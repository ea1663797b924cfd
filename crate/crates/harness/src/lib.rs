//! Experiment harness for deep optimistic linear support learning: config
//! files, seeded multi-run experiments, CSV output and plot descriptions.

use std::path::PathBuf;

use thiserror::Error;

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod plot;

pub use config::{Algorithm, EnvKind, ExperimentConfig};
pub use experiment::{
    reference_ccs, run_experiment, run_seed, seed_rng, summarise, CurveRow, ExperimentResult,
    SeedRun,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("reference CCS: {0}")]
    Reference(String),
    #[error("seed {seed}: {message}")]
    Run { seed: u64, message: String },
}

impl HarnessError {
    /// 2 for configuration problems, 3 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
