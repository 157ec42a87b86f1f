//! q-fair federated training: clients run local SGD from the global model,
//! report q-weighted updates, and the server combines them with the
//! q-FedAvg step `w ← w − ΣΔ_k / Σh_k`.

mod aggregate;
mod train;

pub use aggregate::{global_objective, local_update, q_weight, qffl_aggregate, LocalUpdate};
pub use train::{
    evaluate_clients, round_log_csv, round_seed, train_federated, train_federated_with,
    ClientEvaluation, FederatedRun, RoundRecord,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lstm::{LstmError, TrainConfig};
use crate::trace::FederatedDataset;

#[derive(Debug, Error)]
pub enum QfflError {
    #[error("client `{client}`: {source}")]
    Client {
        client: String,
        #[source]
        source: LstmError,
    },
    #[error(transparent)]
    Model(#[from] LstmError),
    #[error("invalid federated config: {0}")]
    InvalidConfig(String),
    #[error("negative loss {0}")]
    NegativeLoss(f64),
    #[error("client `{0}` has zero loss, which is undefined for 0 < q < 1")]
    ZeroLossFractionalQ(String),
    #[error("degenerate round: the h_k sum to {0}")]
    DegenerateRound(f64),
    #[error("training diverged in round {round}: {detail}")]
    Diverged { round: usize, detail: String },
    #[error("no clients")]
    NoClients,
    #[error("round observer failed: {0}")]
    Observer(#[from] std::io::Error),
}

/// One federated participant and its sample weight p_k = n_k / n.
#[derive(Debug, Clone)]
pub struct ClientState {
    pub dataset: FederatedDataset,
    pub weight: f64,
}

impl ClientState {
    /// Wraps datasets as clients weighted by pattern count.
    pub fn from_datasets(datasets: Vec<FederatedDataset>) -> Result<Vec<ClientState>, QfflError> {
        if datasets.is_empty() {
            return Err(QfflError::NoClients);
        }
        let total: usize = datasets.iter().map(|d| d.n_k).sum();
        if datasets.iter().any(|d| d.n_k == 0) {
            return Err(QfflError::InvalidConfig(
                "every client needs at least one pattern".into(),
            ));
        }
        Ok(datasets
            .into_iter()
            .map(|dataset| ClientState {
                weight: dataset.n_k as f64 / total as f64,
                dataset,
            })
            .collect())
    }

    pub fn id(&self) -> &str {
        &self.dataset.client_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QConfig {
    pub q: f64,
    pub rounds: usize,
    /// Step constant L of the aggregation; defaults to 1 / learning_rate.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    pub train: TrainConfig,
    /// Stop when the validation objective has not improved for this many
    /// rounds. Off when `None`.
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
}

impl QConfig {
    pub fn new(q: f64, rounds: usize, train: TrainConfig) -> Self {
        Self {
            q,
            rounds,
            lipschitz: None,
            train,
            early_stop_patience: None,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or(1.0 / self.train.learning_rate)
    }

    pub fn validate(&self) -> Result<(), QfflError> {
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(QfflError::InvalidConfig(format!(
                "q must be >= 0, got {}",
                self.q
            )));
        }
        if self.rounds == 0 {
            return Err(QfflError::InvalidConfig("rounds must be at least 1".into()));
        }
        let l = self.lipschitz();
        if !(l > 0.0 && l.is_finite()) {
            return Err(QfflError::InvalidConfig(format!(
                "L must be positive and finite, got {l}"
            )));
        }
        self.train.validate()?;
        Ok(())
    }
}
