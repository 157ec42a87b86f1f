//! Elastic optical network back end: topology and shortest-path routing,
//! first-fit spectrum allocation with continuity and contiguity, and
//! over/under-provisioning accounting of predicted against actual demand.

mod provisioning;
mod spectrum;
mod topology;

pub use provisioning::{
    choose_destinations, gbps_to_slots, provisioning, run_rsa_evaluation, AllocationRecord,
    ConnectionProvisioning, ConnectionRequest, Provisioning, ProvisioningReport, RsaOutcome,
    GBPS_PER_SLOT,
};
pub use spectrum::{first_fit_allocate, DirectedLink, SlotInterval, SpectrumGrid};
pub use topology::{shortest_path, Link, Route, Topology, ABILENE_NODES, ABILENE_TOPOLOGY};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EonError {
    #[error("topology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("source and destination are both `{0}`")]
    SameEndpoints(String),
    #[error("no path from `{src}` to `{dst}`")]
    Unreachable { src: String, dst: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("series length mismatch: {predicted} predicted vs {actual} actual")]
    LengthMismatch { predicted: usize, actual: usize },
}
