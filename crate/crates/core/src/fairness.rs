//! Coefficient-of-variation fairness measures, all in percent. Lower is
//! fairer; zero means perfectly uniform.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FairnessError {
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("values must be non-negative and finite")]
    InvalidValue,
    #[error("mean is zero; coefficient of variation is undefined")]
    ZeroMean,
    #[error("under and over series differ in length ({under} vs {over})")]
    LengthMismatch { under: usize, over: usize },
}

/// Fairness of one q-fair model across clients and connections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessSummary {
    pub q: f64,
    pub cv_loss: f64,
    pub cv_qos: f64,
    /// Two-sample CV over (û, ô).
    pub cv_ou: f64,
}

fn check(values: &[f64]) -> Result<(), FairnessError> {
    if values.iter().all(|v| *v >= 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(FairnessError::InvalidValue)
    }
}

/// CV of client losses:
/// `100·sqrt( m²/(m−1) · Σ(F_k − F̄)² / (Σ F_k)² )`.
pub fn cv_loss(losses: &[f64]) -> Result<f64, FairnessError> {
    let m = losses.len();
    if m < 2 {
        return Err(FairnessError::TooFew { needed: 2, got: m });
    }
    check(losses)?;
    let total: f64 = losses.iter().sum();
    if total <= 0.0 {
        return Err(FairnessError::ZeroMean);
    }
    let mean = total / m as f64;
    let dev: f64 = losses.iter().map(|f| (f - mean).powi(2)).sum();
    let mf = m as f64;
    Ok(100.0 * ((mf * mf / (mf - 1.0)) * dev / (total * total)).sqrt())
}

/// CV of QoS over the 2m values {u_k} ∪ {o_k} around their common mean Q̂.
pub fn cv_qos(under: &[f64], over: &[f64]) -> Result<f64, FairnessError> {
    if under.len() != over.len() {
        return Err(FairnessError::LengthMismatch {
            under: under.len(),
            over: over.len(),
        });
    }
    let m = under.len();
    if m == 0 {
        return Err(FairnessError::TooFew { needed: 1, got: 0 });
    }
    check(under)?;
    check(over)?;
    let q_hat = (under.iter().sum::<f64>() + over.iter().sum::<f64>()) / (2 * m) as f64;
    if q_hat <= 0.0 {
        return Err(FairnessError::ZeroMean);
    }
    let dev: f64 = under.iter().chain(over).map(|v| (v - q_hat).powi(2)).sum();
    Ok(100.0 * (dev / (2 * m - 1) as f64 / (q_hat * q_hat)).sqrt())
}

/// Sample CV of the pair (û, ô): `100·√2·|û − ô| / (û + ô)`.
///
/// The printed closed form for this measure is identically 100, so the
/// two-sample CV it is meant to express is computed instead.
pub fn cv_ou(mean_under: f64, mean_over: f64) -> Result<f64, FairnessError> {
    check(&[mean_under, mean_over])?;
    let sum = mean_under + mean_over;
    if sum <= 0.0 {
        return Err(FairnessError::ZeroMean);
    }
    Ok(100.0 * std::f64::consts::SQRT_2 * (mean_under - mean_over).abs() / sum)
}

/// Relative reduction of a CV in percent: `100·(base − new)/base`.
pub fn improvement(cv_base: f64, cv_new: f64) -> Result<f64, FairnessError> {
    if !(cv_base > 0.0) {
        return Err(FairnessError::ZeroMean);
    }
    Ok(100.0 * (cv_base - cv_new) / cv_base)
}

/// Jain's fairness index `(Σx)² / (n·Σx²)`, in (0, 1].
pub fn jain_index(values: &[f64]) -> Result<f64, FairnessError> {
    if values.is_empty() {
        return Err(FairnessError::TooFew { needed: 1, got: 0 });
    }
    check(values)?;
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|v| v * v).sum();
    if sq == 0.0 {
        return Err(FairnessError::ZeroMean);
    }
    Ok(sum * sum / (values.len() as f64 * sq))
}
