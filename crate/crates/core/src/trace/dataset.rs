use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    aggregate_node_traffic, infuse_noise, make_windows, DemandMatrixSeries, Direction, NoiseSpec,
    Pattern, ScalerParams, TraceError,
};

/// Number of trailing patterns held out for testing in every client dataset.
pub const TEST_PATTERNS: usize = 100;

const SNAPSHOT_VERSION: u32 = 1;

/// What to build for one federated client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSpec {
    pub node: String,
    /// Number of consecutive patterns n_k.
    pub size: usize,
    pub noise: NoiseSpec,
}

/// A client's windowed, split and normalized traffic dataset.
///
/// All pattern values are in scaled space; `scaler` maps them back to Gbps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedDataset {
    pub client_id: String,
    pub window_length: usize,
    pub n_k: usize,
    pub scaler: ScalerParams,
    pub noise: NoiseSpec,
    pub train: Vec<Pattern>,
    pub val: Vec<Pattern>,
    pub test: Vec<Pattern>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    dataset: FederatedDataset,
}

impl FederatedDataset {
    pub fn to_snapshot_json(&self) -> Result<String, TraceError> {
        Ok(serde_json::to_string_pretty(&Snapshot {
            format: "fairfed-dataset".into(),
            version: SNAPSHOT_VERSION,
            dataset: self.clone(),
        })?)
    }

    pub fn from_snapshot_json(text: &str) -> Result<Self, TraceError> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.format != "fairfed-dataset" || snap.version != SNAPSHOT_VERSION {
            return Err(TraceError::Validation(format!(
                "unsupported snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        Ok(snap.dataset)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = self.to_snapshot_json().map_err(std::io::Error::other)?;
        std::fs::write(path, text)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_snapshot_json(&text).map_err(std::io::Error::other)
    }
}

/// Train/validation/test sizes for `n_k` patterns: the last
/// [`TEST_PATTERNS`] go to test and the remainder splits 80/20 with the
/// training count rounded down.
pub fn split_sizes(n_k: usize) -> Result<(usize, usize, usize), TraceError> {
    if n_k <= TEST_PATTERNS + 1 {
        return Err(TraceError::InvalidRequest(format!(
            "n_k = {n_k} leaves no training and validation patterns after the {TEST_PATTERNS}-pattern test split"
        )));
    }
    let rest = n_k - TEST_PATTERNS;
    let train = rest * 4 / 5;
    if train == 0 {
        return Err(TraceError::InvalidRequest(format!(
            "n_k = {n_k} yields an empty training split"
        )));
    }
    Ok((train, rest - train, TEST_PATTERNS))
}

/// Builds one dataset per client from the node series of `matrix_series`.
///
/// Noise is added to the whole node series before windowing. Each dataset
/// keeps the first `size` patterns, splits them in temporal order, and is
/// normalized with a scaler fit on the observations covered by its
/// training patterns.
pub fn build_federated_datasets(
    matrix_series: &DemandMatrixSeries,
    clients: &[ClientSpec],
    window: usize,
    direction: Direction,
) -> Result<Vec<FederatedDataset>, TraceError> {
    if clients.is_empty() {
        return Err(TraceError::InvalidRequest("no clients requested".into()));
    }
    clients
        .par_iter()
        .map(|spec| build_one(matrix_series, spec, window, direction))
        .collect()
}

fn build_one(
    matrix_series: &DemandMatrixSeries,
    spec: &ClientSpec,
    window: usize,
    direction: Direction,
) -> Result<FederatedDataset, TraceError> {
    let (n_train, n_val, _) = split_sizes(spec.size)?;
    let raw = aggregate_node_traffic(matrix_series, &spec.node, direction)?;
    let noisy = infuse_noise(&raw, &spec.noise)?;

    let available = noisy.values.len().saturating_sub(window + 1);
    if spec.size > available {
        return Err(TraceError::InsufficientData {
            client: spec.node.clone(),
            requested: spec.size,
            available,
            shortfall: spec.size - available,
        });
    }
    // Observations spanned by the training patterns: inputs plus targets.
    let scaler = ScalerParams::fit(&noisy.values[..n_train + window + 1])?;
    let scaled: Vec<f64> = noisy.values[..spec.size + window + 1]
        .iter()
        .map(|&v| scaler.forward(v))
        .collect();
    let mut patterns = make_windows(&scaled, window)?;
    debug_assert_eq!(patterns.len(), spec.size);
    let test = patterns.split_off(n_train + n_val);
    let val = patterns.split_off(n_train);

    Ok(FederatedDataset {
        client_id: spec.node.clone(),
        window_length: window,
        n_k: spec.size,
        scaler,
        noise: spec.noise,
        train: patterns,
        val,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_synthetic_traces, NoiseDistribution, SyntheticSpec};

    #[test]
    fn split_arithmetic() {
        assert_eq!(split_sizes(102).unwrap(), (1, 1, 100));
        assert_eq!(split_sizes(3000).unwrap(), (2320, 580, 100));
        assert_eq!(split_sizes(2000).unwrap(), (1520, 380, 100));
        // 0.8 * 7 = 5.6 rounds down.
        assert_eq!(split_sizes(107).unwrap(), (5, 2, 100));
        assert!(split_sizes(100).is_err());
    }

    fn synthetic(steps: usize) -> DemandMatrixSeries {
        generate_synthetic_traces(&SyntheticSpec::abilene_default(steps, 9)).unwrap()
    }

    #[test]
    fn sizes_and_splits() {
        let series = synthetic(700);
        let nodes = series.nodes().to_vec();
        let clients: Vec<ClientSpec> = [300usize, 200, 500]
            .iter()
            .zip(&nodes)
            .enumerate()
            .map(|(i, (&size, node))| ClientSpec {
                node: node.clone(),
                size,
                noise: NoiseSpec::new(
                    NoiseDistribution::Gaussian {
                        mean: 1.0,
                        std: 0.5,
                    },
                    i as u64,
                ),
            })
            .collect();
        let ds = build_federated_datasets(&series, &clients, 12, Direction::Incoming).unwrap();
        for (d, c) in ds.iter().zip(&clients) {
            assert_eq!(d.client_id, c.node);
            assert_eq!(d.n_k, c.size);
            assert_eq!(d.train.len() + d.val.len() + d.test.len(), c.size);
            assert_eq!(d.test.len(), TEST_PATTERNS);
            assert!(d
                .train
                .iter()
                .chain(&d.val)
                .chain(&d.test)
                .all(|p| p.input.len() == 13));
            // Temporal order across split boundaries: the next pattern's
            // input is the previous one shifted by one step.
            let all: Vec<&Pattern> = d.train.iter().chain(&d.val).chain(&d.test).collect();
            for w in all.windows(2) {
                assert_eq!(w[0].input[1..], w[1].input[..12]);
                assert_eq!(w[0].target, w[1].input[12]);
            }
        }
    }

    #[test]
    fn shortfall_names_client() {
        let series = synthetic(300);
        let node = series.nodes()[1].clone();
        let clients = vec![ClientSpec {
            node: node.clone(),
            size: 290,
            noise: NoiseSpec::none(),
        }];
        match build_federated_datasets(&series, &clients, 20, Direction::Incoming).unwrap_err() {
            TraceError::InsufficientData {
                client, shortfall, ..
            } => {
                assert_eq!(client, node);
                assert_eq!(shortfall, 290 - (300 - 21));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn snapshot_reload_is_bit_exact() {
        let series = synthetic(400);
        let clients = vec![ClientSpec {
            node: series.nodes()[2].clone(),
            size: 250,
            noise: NoiseSpec::new(
                NoiseDistribution::LogNormal {
                    mu: 1.0,
                    sigma: 0.5,
                },
                5,
            ),
        }];
        let ds = build_federated_datasets(&series, &clients, 10, Direction::Incoming).unwrap();
        let text = ds[0].to_snapshot_json().unwrap();
        let back = FederatedDataset::from_snapshot_json(&text).unwrap();
        assert_eq!(back, ds[0]);
        let bits = |d: &FederatedDataset| -> Vec<u64> {
            d.train
                .iter()
                .chain(&d.val)
                .chain(&d.test)
                .flat_map(|p| p.input.iter().chain([&p.target]).map(|v| v.to_bits()))
                .chain([d.scaler.mean.to_bits(), d.scaler.std.to_bits()])
                .collect()
        };
        assert_eq!(bits(&back), bits(&ds[0]));
    }
}
