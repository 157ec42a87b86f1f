//! q-fair federated traffic forecasting for elastic optical networks.
//!
//! Per-node traffic traces become imbalanced, non-iid client datasets
//! ([`trace`]); clients train a shared LSTM forecaster ([`lstm`]) under the
//! q-fair federated objective ([`qffl`]); the resulting predictions drive
//! shortest-path, first-fit spectrum allocation ([`eon`]); and
//! coefficient-of-variation measures ([`fairness`]) quantify how evenly
//! accuracy and QoS are spread. [`experiment`] wires the stages together
//! with reproducible outputs.

pub mod eon;
pub mod experiment;
pub mod fairness;
pub mod lstm;
pub mod qffl;
pub mod trace;
