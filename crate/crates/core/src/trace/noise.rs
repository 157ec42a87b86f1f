use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use super::{NodeTrafficSeries, TraceError};

/// Additive noise distribution.
///
/// Log-normal parameters describe the underlying normal; gamma uses
/// shape/scale; exponential uses the rate λ (mean 1/λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseDistribution {
    None,
    Gaussian { mean: f64, std: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            distribution: NoiseDistribution::None,
            seed: 0,
        }
    }

    pub fn new(distribution: NoiseDistribution, seed: u64) -> Self {
        Self { distribution, seed }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(TraceError::InvalidNoise(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(TraceError::InvalidNoise(format!(
                    "{name} must be finite, got {v}"
                )))
            }
        };
        match self.distribution {
            NoiseDistribution::None => Ok(()),
            NoiseDistribution::Gaussian { mean, std } => {
                finite("mean", mean)?;
                positive("std", std)
            }
            NoiseDistribution::LogNormal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            NoiseDistribution::Exponential { rate } => positive("rate", rate),
            NoiseDistribution::Gamma { shape, scale } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
        }
    }

    /// Draws `n` i.i.d. noise values.
    pub fn sample(&self, n: usize) -> Result<Vec<f64>, TraceError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let bad = |e: &dyn std::fmt::Display| TraceError::InvalidNoise(e.to_string());
        Ok(match self.distribution {
            NoiseDistribution::None => vec![0.0; n],
            NoiseDistribution::Gaussian { mean, std } => {
                let d = Normal::new(mean, std).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            NoiseDistribution::LogNormal { mu, sigma } => {
                let d = LogNormal::new(mu, sigma).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            NoiseDistribution::Exponential { rate } => {
                let d = Exp::new(rate).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
            NoiseDistribution::Gamma { shape, scale } => {
                let d = Gamma::new(shape, scale).map_err(|e| bad(&e))?;
                d.sample_iter(&mut rng).take(n).collect()
            }
        })
    }
}

/// Adds i.i.d. noise drawn from `spec` to every value of the series.
pub fn infuse_noise(
    series: &NodeTrafficSeries,
    spec: &NoiseSpec,
) -> Result<NodeTrafficSeries, TraceError> {
    if spec.distribution == NoiseDistribution::None {
        spec.validate()?;
        return Ok(series.clone());
    }
    let noise = spec.sample(series.values.len())?;
    Ok(NodeTrafficSeries {
        node_id: series.node_id.clone(),
        values: series
            .values
            .iter()
            .zip(noise)
            .map(|(x, e)| x + e)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    fn zeros(n: usize) -> NodeTrafficSeries {
        NodeTrafficSeries {
            node_id: "X".into(),
            values: vec![0.0; n],
        }
    }

    #[test]
    fn none_is_identity() {
        let s = NodeTrafficSeries {
            node_id: "X".into(),
            values: vec![1.5, 2.5, 0.0],
        };
        assert_eq!(infuse_noise(&s, &NoiseSpec::none()).unwrap(), s);
    }

    #[test]
    fn gaussian_moments() {
        let spec = NoiseSpec::new(
            NoiseDistribution::Gaussian {
                mean: 10.0,
                std: 2.0,
            },
            7,
        );
        let out = infuse_noise(&zeros(100_000), &spec).unwrap();
        let (mean, std) = moments(&out.values);
        assert!((mean - 10.0).abs() <= 0.1, "mean {mean}");
        assert!((std - 2.0).abs() <= 0.04, "std {std}");
    }

    #[test]
    fn exponential_mean_is_inverse_rate() {
        let spec = NoiseSpec::new(NoiseDistribution::Exponential { rate: 2.0 }, 11);
        let out = infuse_noise(&zeros(100_000), &spec).unwrap();
        let (mean, _) = moments(&out.values);
        assert!((mean - 0.5).abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn lognormal_and_gamma_moments() {
        // E[lognormal(1, 0.5)] = exp(1 + 0.125); E[gamma(1, 3)] = 3.
        let ln = NoiseSpec::new(
            NoiseDistribution::LogNormal {
                mu: 1.0,
                sigma: 0.5,
            },
            3,
        );
        let (mean, _) = moments(&ln.sample(100_000).unwrap());
        let expected = (1.125f64).exp();
        assert!((mean / expected - 1.0).abs() < 0.02, "mean {mean}");
        let g = NoiseSpec::new(
            NoiseDistribution::Gamma {
                shape: 1.0,
                scale: 3.0,
            },
            3,
        );
        let (mean, _) = moments(&g.sample(100_000).unwrap());
        assert!((mean / 3.0 - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn same_seed_same_noise() {
        let spec = NoiseSpec::new(
            NoiseDistribution::Gamma {
                shape: 1.0,
                scale: 3.0,
            },
            42,
        );
        let s = zeros(50);
        assert_eq!(
            infuse_noise(&s, &spec).unwrap(),
            infuse_noise(&s, &spec).unwrap()
        );
    }

    #[test]
    fn invalid_parameters_rejected() {
        for d in [
            NoiseDistribution::Gaussian {
                mean: 0.0,
                std: 0.0,
            },
            NoiseDistribution::LogNormal {
                mu: 0.0,
                sigma: -1.0,
            },
            NoiseDistribution::Exponential { rate: 0.0 },
            NoiseDistribution::Gamma {
                shape: 1.0,
                scale: 0.0,
            },
            NoiseDistribution::Gamma {
                shape: -2.0,
                scale: 1.0,
            },
        ] {
            let e = infuse_noise(&zeros(3), &NoiseSpec::new(d, 1)).unwrap_err();
            assert!(matches!(e, TraceError::InvalidNoise(_)));
        }
    }
}
