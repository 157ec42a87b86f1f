//! Stacked LSTM sequence regressor with a linear output head, trained by
//! backpropagation through time and plain mini-batch SGD.

mod model;
mod params;
mod train;

pub use model::{backward, forward, loss_and_gradient, mse_loss, predict_batch};
pub use params::{init_params, unflatten, LstmLayer, LstmParams, OutputHead, ParamVector};
pub use train::{sgd_epochs, TrainConfig};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("invalid model shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("parameter vector has {found} entries, shape needs {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("input sequence contains a non-finite value at step {0}")]
    NonFiniteInput(usize),
    #[error("input sequence is empty")]
    EmptySequence,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("numerical overflow: {0}")]
    Overflow(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}

/// Layer widths of the network. Inputs and outputs are scalar.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub output_dim: usize,
}

impl ModelShape {
    pub fn new(hidden_sizes: Vec<usize>) -> Self {
        Self {
            input_dim: 1,
            hidden_sizes,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<(), LstmError> {
        if self.input_dim != 1 || self.output_dim != 1 {
            return Err(LstmError::InvalidShape(format!(
                "only scalar sequences are supported (input_dim = {}, output_dim = {})",
                self.input_dim, self.output_dim
            )));
        }
        if self.hidden_sizes.is_empty() {
            return Err(LstmError::InvalidShape(
                "at least one LSTM layer is required".into(),
            ));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(LstmError::InvalidShape(
                "layer widths must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Input width of layer `l`.
    pub fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input_dim
        } else {
            self.hidden_sizes[l - 1]
        }
    }

    /// `Σ 4·(h·(in + h) + h)` over layers plus the head's `h_last·out + out`.
    pub fn param_count(&self) -> usize {
        let layers: usize = (0..self.hidden_sizes.len())
            .map(|l| {
                let h = self.hidden_sizes[l];
                4 * (h * (self.layer_input(l) + h) + h)
            })
            .sum();
        let top = *self.hidden_sizes.last().unwrap_or(&0);
        layers + top * self.output_dim + self.output_dim
    }

    /// Stable identifier carried by [`ParamVector`].
    pub fn fingerprint(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ModelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hidden: Vec<String> = self.hidden_sizes.iter().map(|h| h.to_string()).collect();
        write!(
            f,
            "lstm(in={}, hidden=[{}], out={})",
            self.input_dim,
            hidden.join(","),
            self.output_dim
        )
    }
}
