//! End-to-end pipeline: build client datasets, sweep q, train, run RSA on
//! the test predictions, and summarize fairness, writing every table and a
//! manifest that is enough to rerun the experiment.

mod config;
mod manifest;
mod run;

pub use crate::trace::generate_synthetic_traces;
pub use config::{
    derive_seed, validate_config, ExperimentConfig, Preset, TraceSource, Violation, MAX_SEED,
};
pub use manifest::{Manifest, MANIFEST_FILE};
pub use run::{
    build_datasets, connection_requests, run_experiment, run_stage, LossRow, ProvisioningRow, QRun,
    RunReport, Stage,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::eon::EonError;
use crate::fairness::FairnessError;
use crate::lstm::LstmError;
use crate::qffl::QfflError;
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {}", join(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] LstmError),
    #[error(transparent)]
    Federated(#[from] QfflError),
    #[error(transparent)]
    Eon(#[from] EonError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error("table: {0}")]
    Table(#[from] csv::Error),
    #[error("table: {0}")]
    TableFormat(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("manifest: {0}")]
    Manifest(String),
}

impl ExperimentError {
    /// The stage an error was raised in, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Self::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
