use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::local_update_at_loss;
use super::{global_objective, qffl_aggregate, ClientState, QConfig, QfflError};
use crate::lstm::{init_params, mse_loss, LstmParams, ModelShape, TrainConfig};

/// Losses of the global model after one aggregation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub q: f64,
    pub train_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub train_objective: f64,
    pub val_objective: f64,
}

#[derive(Debug, Clone)]
pub struct FederatedRun {
    pub params: LstmParams,
    pub records: Vec<RoundRecord>,
}

/// Per-client test losses and their plain mean f̄.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEvaluation {
    pub client_ids: Vec<String>,
    pub losses: Vec<f64>,
    pub mean: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Shuffle seed for a client's local training in a given round. Depends
/// on the client id, not its position, so client order does not matter.
pub fn round_seed(base: u64, round: usize, client_id: &str) -> u64 {
    // FNV-1a over the id.
    let id_hash = client_id.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    });
    splitmix64(splitmix64(base ^ id_hash).wrapping_add(round as u64))
}

fn losses_on(
    params: &LstmParams,
    clients: &[ClientState],
    split: impl Fn(&ClientState) -> &[crate::trace::Pattern] + Sync,
) -> Result<Vec<f64>, QfflError> {
    clients
        .par_iter()
        .map(|c| {
            mse_loss(params, split(c)).map_err(|source| QfflError::Client {
                client: c.id().to_string(),
                source,
            })
        })
        .collect()
}

/// Runs `config.rounds` rounds from freshly initialized parameters
/// (seeded by `config.train.seed`).
pub fn train_federated(
    clients: &[ClientState],
    shape: &ModelShape,
    config: &QConfig,
) -> Result<FederatedRun, QfflError> {
    let initial = init_params(shape, config.train.seed)?;
    train_federated_with(initial, clients, config, |_, _| Ok(()))
}

/// Federated training from `initial`. Every round all clients update
/// from the current global model, the server aggregates, and the new
/// model's train/validation losses are recorded and passed to
/// `on_round` together with the parameters.
pub fn train_federated_with(
    initial: LstmParams,
    clients: &[ClientState],
    config: &QConfig,
    mut on_round: impl FnMut(&RoundRecord, &LstmParams) -> std::io::Result<()>,
) -> Result<FederatedRun, QfflError> {
    config.validate()?;
    if clients.is_empty() {
        return Err(QfflError::NoClients);
    }
    let weights: Vec<f64> = clients.iter().map(|c| c.weight).collect();
    let mut params = initial;
    let mut train_losses = losses_on(&params, clients, |c| &c.dataset.train)?;
    let mut records = Vec::with_capacity(config.rounds);
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for round in 1..=config.rounds {
        let updates = clients
            .par_iter()
            .zip(&train_losses)
            .map(|(c, &loss)| {
                let local = QConfig {
                    train: TrainConfig {
                        seed: round_seed(config.train.seed, round, c.id()),
                        ..config.train.clone()
                    },
                    ..config.clone()
                };
                local_update_at_loss(&params, c, &local, loss)
            })
            .collect::<Result<Vec<_>, _>>()?;
        params = qffl_aggregate(&params, &updates)?;
        if !params.is_finite() {
            return Err(QfflError::Diverged {
                round,
                detail: "global parameters became non-finite".into(),
            });
        }

        train_losses = losses_on(&params, clients, |c| &c.dataset.train)?;
        let val_losses = losses_on(&params, clients, |c| &c.dataset.val)?;
        if let Some((i, bad)) = train_losses
            .iter()
            .chain(&val_losses)
            .enumerate()
            .find(|(_, l)| !l.is_finite())
        {
            let client = clients[i % clients.len()].id();
            return Err(QfflError::Diverged {
                round,
                detail: format!("loss of client `{client}` is {bad}"),
            });
        }
        let record = RoundRecord {
            round,
            q: config.q,
            train_objective: global_objective(&train_losses, &weights, config.q)?,
            val_objective: global_objective(&val_losses, &weights, config.q)?,
            train_losses: train_losses.clone(),
            val_losses,
        };
        on_round(&record, &params)?;
        let val = record.val_objective;
        records.push(record);

        if let Some(patience) = config.early_stop_patience {
            if val < best_val {
                best_val = val;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(FederatedRun { params, records })
}

/// Test-split MSE of every client (scaled space) and their plain mean.
/// With equal test sizes the plain mean equals the sample-weighted one.
pub fn evaluate_clients(
    params: &LstmParams,
    clients: &[ClientState],
) -> Result<ClientEvaluation, QfflError> {
    if clients.is_empty() {
        return Err(QfflError::NoClients);
    }
    let losses = losses_on(params, clients, |c| &c.dataset.test)?;
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    Ok(ClientEvaluation {
        client_ids: clients.iter().map(|c| c.id().to_string()).collect(),
        losses,
        mean,
    })
}

/// Round log as CSV: `round,q,train_<id>...,val_<id>...,train_fq,val_fq`.
pub fn round_log_csv(client_ids: &[String], records: &[RoundRecord]) -> String {
    let mut out = String::from("round,q");
    for id in client_ids {
        let _ = write!(out, ",train_{id}");
    }
    for id in client_ids {
        let _ = write!(out, ",val_{id}");
    }
    out.push_str(",train_fq,val_fq\n");
    for r in records {
        let _ = write!(out, "{},{}", r.round, r.q);
        for v in r.train_losses.iter().chain(&r.val_losses) {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{}", r.train_objective, r.val_objective);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::sgd_epochs;
    use crate::trace::{FederatedDataset, NoiseSpec, Pattern, ScalerParams};

    fn dataset(id: &str, phase: f64, n: usize) -> FederatedDataset {
        let series: Vec<f64> = (0..n + 6).map(|t| (t as f64 * 0.4 + phase).sin()).collect();
        let patterns: Vec<Pattern> = series
            .windows(6)
            .map(|w| Pattern {
                input: w[..5].to_vec(),
                target: w[5],
            })
            .collect();
        FederatedDataset {
            client_id: id.into(),
            window_length: 4,
            n_k: n,
            scaler: ScalerParams {
                mean: 0.0,
                std: 1.0,
            },
            noise: NoiseSpec::none(),
            train: patterns[..n / 2].to_vec(),
            val: patterns[n / 2..3 * n / 4].to_vec(),
            test: patterns[3 * n / 4..n].to_vec(),
        }
    }

    fn train_cfg(lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            batch_size: 8,
            local_epochs: 1,
            seed: 12,
            clip_norm: None,
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let clients = ClientState::from_datasets(vec![
            dataset("a", 0.0, 40),
            dataset("b", 1.0, 24),
            dataset("c", 2.0, 36),
        ])
        .unwrap();
        let total: f64 = clients.iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(clients[1].weight, 0.24);
    }

    #[test]
    fn single_client_q0_is_centralized_sgd() {
        let clients = ClientState::from_datasets(vec![dataset("solo", 0.3, 40)]).unwrap();
        let shape = ModelShape::new(vec![3, 2]);
        let cfg = QConfig::new(0.0, 3, train_cfg(0.05));
        let run = train_federated(&clients, &shape, &cfg).unwrap();

        let mut reference = init_params(&shape, cfg.train.seed).unwrap();
        for round in 1..=3 {
            let c = TrainConfig {
                seed: round_seed(cfg.train.seed, round, "solo"),
                ..cfg.train.clone()
            };
            reference = sgd_epochs(&reference, &clients[0].dataset.train, &c)
                .unwrap()
                .0;
        }
        for (a, b) in run.params.iter().zip(reference.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(run.records.len(), 3);
    }

    #[test]
    fn zero_rounds_rejected() {
        let clients = ClientState::from_datasets(vec![dataset("a", 0.0, 20)]).unwrap();
        let cfg = QConfig::new(1.0, 0, train_cfg(0.05));
        assert!(matches!(
            train_federated(&clients, &ModelShape::new(vec![2]), &cfg),
            Err(QfflError::InvalidConfig(_))
        ));
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = dataset("a", 0.0, 32);
        let b = dataset("b", 2.0, 48);
        let shape = ModelShape::new(vec![3]);
        let cfg = QConfig::new(2.0, 2, train_cfg(0.1));
        let fwd = ClientState::from_datasets(vec![a.clone(), b.clone()]).unwrap();
        let rev = ClientState::from_datasets(vec![b, a]).unwrap();
        let r1 = train_federated(&fwd, &shape, &cfg).unwrap();
        let r2 = train_federated(&fwd, &shape, &cfg).unwrap();
        let r3 = train_federated(&rev, &shape, &cfg).unwrap();
        let bits = |p: &LstmParams| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&r1.params), bits(&r2.params));
        assert_eq!(bits(&r1.params), bits(&r3.params));
        assert_eq!(r1.records, r2.records);
    }

    #[test]
    fn records_and_log() {
        let clients =
            ClientState::from_datasets(vec![dataset("a", 0.0, 32), dataset("b", 1.5, 32)]).unwrap();
        let cfg = QConfig::new(1.0, 4, train_cfg(0.2));
        let run = train_federated(&clients, &ModelShape::new(vec![4]), &cfg).unwrap();
        assert_eq!(run.records.len(), 4);
        for r in &run.records {
            assert!(r.train_objective >= 0.0 && r.val_objective >= 0.0);
            let expected = global_objective(&r.train_losses, &[0.5, 0.5], 1.0).unwrap();
            assert_eq!(r.train_objective, expected);
        }
        let ids: Vec<String> = clients.iter().map(|c| c.id().to_string()).collect();
        let csv = round_log_csv(&ids, &run.records);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "round,q,train_a,train_b,val_a,val_b,train_fq,val_fq"
        );
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn early_stop_truncates() {
        let clients = ClientState::from_datasets(vec![dataset("a", 0.0, 32)]).unwrap();
        let mut cfg = QConfig::new(0.0, 30, train_cfg(0.0));
        cfg.lipschitz = Some(1.0);
        cfg.early_stop_patience = Some(2);
        let run = train_federated(&clients, &ModelShape::new(vec![2]), &cfg).unwrap();
        // A frozen model never improves after the first round.
        assert_eq!(run.records.len(), 3);
    }

    #[test]
    fn evaluation_mean() {
        let clients =
            ClientState::from_datasets(vec![dataset("a", 0.0, 40), dataset("b", 1.0, 40)]).unwrap();
        let p = init_params(&ModelShape::new(vec![2]), 0).unwrap();
        let e = evaluate_clients(&p, &clients).unwrap();
        assert_eq!(e.client_ids, ["a", "b"]);
        assert_eq!(e.mean, (e.losses[0] + e.losses[1]) / 2.0);
    }
}
