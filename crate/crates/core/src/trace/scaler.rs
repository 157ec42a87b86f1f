use serde::{Deserialize, Serialize};

use super::TraceError;

/// Z-score normalization parameters in Gbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleDirection {
    Forward,
    Inverse,
}

impl ScalerParams {
    pub fn new(mean: f64, std: f64) -> Result<Self, TraceError> {
        if !(std > 0.0 && std.is_finite()) || !mean.is_finite() {
            return Err(TraceError::DegenerateScaler(std));
        }
        Ok(Self { mean, std })
    }

    /// Fits mean and sample standard deviation (denominator n − 1).
    pub fn fit(values: &[f64]) -> Result<Self, TraceError> {
        if values.len() < 2 {
            return Err(TraceError::DegenerateScaler(0.0));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self::new(mean, var.sqrt())
    }

    pub fn forward(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.std + self.mean
    }
}

pub fn apply_scaler(
    values: &[f64],
    scaler: &ScalerParams,
    direction: ScaleDirection,
) -> Result<Vec<f64>, TraceError> {
    if !(scaler.std > 0.0) {
        return Err(TraceError::DegenerateScaler(scaler.std));
    }
    Ok(match direction {
        ScaleDirection::Forward => values.iter().map(|&v| scaler.forward(v)).collect(),
        ScaleDirection::Inverse => values.iter().map(|&v| scaler.inverse(v)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forward_value() {
        let s = ScalerParams::new(10.0, 2.0).unwrap();
        assert_eq!(
            apply_scaler(&[14.0], &s, ScaleDirection::Forward).unwrap(),
            vec![2.0]
        );
    }

    #[test]
    fn fit_uses_sample_std() {
        let s = ScalerParams::fit(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std, 1.0);
    }

    #[test]
    fn zero_std_rejected() {
        let s = ScalerParams {
            mean: 1.0,
            std: 0.0,
        };
        assert!(matches!(
            apply_scaler(&[1.0], &s, ScaleDirection::Forward),
            Err(TraceError::DegenerateScaler(_))
        ));
        assert!(ScalerParams::fit(&[4.0, 4.0, 4.0]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(values in prop::collection::vec(-1e4f64..1e4, 1..50),
                      mean in -100f64..100.0, std in 0.01f64..100.0) {
            let s = ScalerParams::new(mean, std).unwrap();
            let fwd = apply_scaler(&values, &s, ScaleDirection::Forward).unwrap();
            let back = apply_scaler(&fwd, &s, ScaleDirection::Inverse).unwrap();
            for (a, b) in values.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }

        #[test]
        fn fitted_values_are_standardized(values in prop::collection::vec(-1e3f64..1e3, 3..200)) {
            let Ok(s) = ScalerParams::fit(&values) else { return Ok(()); };
            prop_assume!(s.std > 1e-6);
            let z = apply_scaler(&values, &s, ScaleDirection::Forward).unwrap();
            let back = ScalerParams::fit(&z).unwrap();
            prop_assert!(back.mean.abs() < 1e-6);
            prop_assert!((back.std - 1.0).abs() < 1e-6);
        }
    }
}
