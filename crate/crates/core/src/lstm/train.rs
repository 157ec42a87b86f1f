use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_gradient, LstmError, LstmParams};
use crate::trace::Pattern;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
    pub seed: u64,
    /// Global-norm gradient clipping threshold; `None` disables clipping.
    #[serde(default)]
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            batch_size: 256,
            local_epochs: 1,
            seed: 0,
            clip_norm: Some(5.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LstmError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(LstmError::InvalidConfig(format!(
                "learning_rate must be a non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(LstmError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if self.local_epochs == 0 {
            return Err(LstmError::InvalidConfig(
                "local_epochs must be at least 1".into(),
            ));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(LstmError::InvalidConfig(format!(
                    "clip_norm must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Mini-batch SGD over `split` for `config.local_epochs` epochs.
///
/// Each epoch visits the patterns in an order shuffled from `config.seed`
/// (one generator across epochs); a short final batch is kept. Returns the
/// updated parameters and the sample-weighted mean batch loss of the last
/// epoch.
pub fn sgd_epochs(
    params: &LstmParams,
    split: &[Pattern],
    config: &TrainConfig,
) -> Result<(LstmParams, f64), LstmError> {
    config.validate()?;
    if split.is_empty() {
        return Err(LstmError::EmptyBatch);
    }
    let mut params = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..split.len()).collect();
    let mut batch: Vec<Pattern> = Vec::with_capacity(config.batch_size);
    let mut epoch_loss = 0.0;

    for _ in 0..config.local_epochs {
        order.shuffle(&mut rng);
        epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| split[i].clone()));
            let (loss, mut grad) = loss_and_gradient(&params, &batch)?;
            epoch_loss += loss * chunk.len() as f64;

            let mut step = config.learning_rate;
            if let Some(max_norm) = config.clip_norm {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    step *= max_norm / norm;
                }
            }
            for g in grad.iter_mut() {
                *g *= step;
            }
            for (w, g) in params.iter_mut().zip(grad.iter()) {
                *w -= g;
            }
        }
        epoch_loss /= split.len() as f64;
    }
    Ok((params, epoch_loss))
}
