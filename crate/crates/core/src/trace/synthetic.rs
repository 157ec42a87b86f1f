use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DemandMatrixSeries, TraceError};
use crate::eon::ABILENE_NODES;

/// Diurnal shape of the total traffic entering one node, in Gbps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeProfile {
    pub base: f64,
    pub amplitude: f64,
    pub period_minutes: f64,
    /// Phase offset in radians.
    pub phase: f64,
    /// Amplitude of the half-period harmonic.
    pub harmonic: f64,
    /// Linear drift in Gbps per day.
    pub trend: f64,
    /// Standard deviation of Gaussian jitter on the node total.
    pub noise_std: f64,
}

impl NodeProfile {
    pub fn constant(base: f64) -> Self {
        Self {
            base,
            amplitude: 0.0,
            period_minutes: 1440.0,
            phase: 0.0,
            harmonic: 0.0,
            trend: 0.0,
            noise_std: 0.0,
        }
    }

    fn level(&self, minutes: f64) -> f64 {
        let angle = TAU * minutes / self.period_minutes;
        self.base
            + self.amplitude * (angle + self.phase).sin()
            + self.harmonic * (2.0 * angle + 2.0 * self.phase).sin()
            + self.trend * minutes / 1440.0
    }
}

/// Parameters of the synthetic demand-matrix generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub nodes: Vec<String>,
    /// One profile per node, describing its incoming total.
    pub profiles: Vec<NodeProfile>,
    pub steps: usize,
    pub interval_minutes: i64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Twelve Abilene-named nodes with heterogeneous diurnal profiles drawn
    /// from `seed`, sampled every 5 minutes.
    pub fn abilene_default(steps: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_D1A1);
        let profiles = ABILENE_NODES
            .iter()
            .map(|_| {
                let base = rng.random_range(20.0..60.0);
                NodeProfile {
                    base,
                    amplitude: base * rng.random_range(0.25..0.6),
                    period_minutes: 1440.0,
                    phase: rng.random_range(0.0..TAU),
                    harmonic: base * rng.random_range(0.0..0.2),
                    trend: base * rng.random_range(-0.01..0.01),
                    noise_std: base * rng.random_range(0.02..0.06),
                }
            })
            .collect();
        Self {
            nodes: ABILENE_NODES.iter().map(|s| s.to_string()).collect(),
            profiles,
            steps,
            interval_minutes: 5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let bad = |m: String| Err(TraceError::Validation(m));
        if self.nodes.len() < 2 {
            return bad("synthetic traces need at least two nodes".into());
        }
        if self.profiles.len() != self.nodes.len() {
            return bad(format!(
                "{} profiles for {} nodes",
                self.profiles.len(),
                self.nodes.len()
            ));
        }
        if self.steps == 0 {
            return Err(TraceError::NoTimestamps);
        }
        if self.interval_minutes <= 0 {
            return bad("interval must be positive".into());
        }
        for (node, p) in self.nodes.iter().zip(&self.profiles) {
            if !(p.period_minutes > 0.0) || !(p.noise_std >= 0.0) {
                return bad(format!("invalid profile for `{node}`"));
            }
        }
        Ok(())
    }
}

/// Generates a demand-matrix series whose per-node incoming totals follow
/// the configured profiles. Each total is split over the other nodes with
/// fixed random shares, so aggregating incoming traffic recovers it.
pub fn generate_synthetic_traces(spec: &SyntheticSpec) -> Result<DemandMatrixSeries, TraceError> {
    spec.validate()?;
    let n = spec.nodes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // shares[d][s]: fraction of node d's incoming traffic sourced at s.
    let shares: Vec<Vec<f64>> = (0..n)
        .map(|d| {
            let raw: Vec<f64> = (0..n)
                .map(|s| {
                    if s == d {
                        0.0
                    } else {
                        rng.random_range(0.2..1.0)
                    }
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|w| w / total).collect()
        })
        .collect();

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut timestamps = Vec::with_capacity(spec.steps);
    let mut demands = Vec::with_capacity(spec.steps);
    for t in 0..spec.steps {
        let minutes = t as i64 * spec.interval_minutes;
        timestamps.push(minutes);
        let mut map = BTreeMap::new();
        for (d, profile) in spec.profiles.iter().enumerate() {
            let jitter = if profile.noise_std > 0.0 {
                profile.noise_std * unit.sample(&mut rng)
            } else {
                0.0
            };
            let total = (profile.level(minutes as f64) + jitter).max(0.0);
            for (s, &share) in shares[d].iter().enumerate() {
                if s != d {
                    map.insert((s, d), share * total);
                }
            }
        }
        demands.push(map);
    }
    DemandMatrixSeries::new(spec.nodes.clone(), timestamps, demands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{aggregate_node_traffic, Direction};

    #[test]
    fn flat_profile_gives_constant_series() {
        let spec = SyntheticSpec {
            nodes: vec!["A".into(), "B".into(), "C".into()],
            profiles: vec![NodeProfile::constant(12.0); 3],
            steps: 50,
            interval_minutes: 5,
            seed: 1,
        };
        let series = generate_synthetic_traces(&spec).unwrap();
        for node in ["A", "B", "C"] {
            let v = aggregate_node_traffic(&series, node, Direction::Incoming)
                .unwrap()
                .values;
            assert!(v.iter().all(|&x| x == v[0]));
            assert!((v[0] - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let spec = SyntheticSpec::abilene_default(200, 77);
        assert_eq!(
            generate_synthetic_traces(&spec).unwrap(),
            generate_synthetic_traces(&spec).unwrap()
        );
        let other = SyntheticSpec::abilene_default(200, 78);
        assert_ne!(
            generate_synthetic_traces(&spec).unwrap(),
            generate_synthetic_traces(&other).unwrap()
        );
    }

    #[test]
    fn daily_period_peaks_at_lag_288() {
        let mut profile = NodeProfile::constant(40.0);
        profile.amplitude = 15.0;
        profile.noise_std = 0.2;
        let spec = SyntheticSpec {
            nodes: vec!["A".into(), "B".into()],
            profiles: vec![profile; 2],
            steps: 288 * 30,
            interval_minutes: 5,
            seed: 3,
        };
        let series = generate_synthetic_traces(&spec).unwrap();
        let x = aggregate_node_traffic(&series, "A", Direction::Incoming)
            .unwrap()
            .values;
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let acf = |lag: usize| -> f64 {
            (0..x.len() - lag)
                .map(|t| (x[t] - mean) * (x[t + lag] - mean))
                .sum::<f64>()
                / x.len() as f64
        };
        let best = (150..450)
            .max_by(|&a, &b| acf(a).total_cmp(&acf(b)))
            .unwrap();
        assert_eq!(best, 288);
    }
}
