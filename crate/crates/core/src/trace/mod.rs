//! Traffic trace ingestion: demand-matrix parsing, per-node aggregation,
//! noise infusion, sliding windows, scaling and federated dataset assembly.

mod dataset;
mod demand;
mod noise;
mod scaler;
mod synthetic;
mod window;

pub use dataset::{
    build_federated_datasets, split_sizes, ClientSpec, FederatedDataset, TEST_PATTERNS,
};
pub use demand::{
    aggregate_node_traffic, parse_demand_matrices, DemandFormat, DemandMatrixSeries, Direction,
    NodeTrafficSeries,
};
pub use noise::{infuse_noise, NoiseDistribution, NoiseSpec};
pub use scaler::{apply_scaler, ScaleDirection, ScalerParams};
pub use synthetic::{generate_synthetic_traces, NodeProfile, SyntheticSpec};
pub use window::{make_windows, Pattern};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no timestamps")]
    NoTimestamps,
    #[error("invalid series: {0}")]
    Validation(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),
    #[error(
        "series of length {len} is too short for window length {window} (need at least {needed})"
    )]
    SeriesTooShort {
        len: usize,
        window: usize,
        needed: usize,
    },
    #[error("client `{client}` needs {requested} patterns but only {available} are available (short by {shortfall})")]
    InsufficientData {
        client: String,
        requested: usize,
        available: usize,
        shortfall: usize,
    },
    #[error("degenerate scaler: standard deviation must be positive, got {0}")]
    DegenerateScaler(f64),
    #[error("invalid dataset request: {0}")]
    InvalidRequest(String),
    #[error("snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
}
