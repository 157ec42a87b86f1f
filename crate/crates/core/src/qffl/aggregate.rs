use super::{ClientState, QConfig, QfflError};
use crate::lstm::{mse_loss, sgd_epochs, unflatten, LstmParams, ParamVector};

/// `Σ_k p_k/(q+1) · F_k^(q+1)`; at q = 0 this is `Σ_k p_k F_k`.
pub fn global_objective(losses: &[f64], weights: &[f64], q: f64) -> Result<f64, QfflError> {
    if losses.len() != weights.len() {
        return Err(QfflError::InvalidConfig(format!(
            "{} losses for {} weights",
            losses.len(),
            weights.len()
        )));
    }
    if let Some(&bad) = losses.iter().find(|&&f| f < 0.0 || f.is_nan()) {
        return Err(QfflError::NegativeLoss(bad));
    }
    if q == 0.0 {
        return Ok(losses.iter().zip(weights).map(|(f, p)| p * f).sum());
    }
    Ok(losses
        .iter()
        .zip(weights)
        .map(|(f, p)| p / (q + 1.0) * f.powf(q + 1.0))
        .sum())
}

/// Relative weight `F^q` a client's update receives; `0^0 = 1`.
pub fn q_weight(loss: f64, q: f64) -> f64 {
    if q == 0.0 {
        1.0
    } else {
        loss.powf(q)
    }
}

/// A client's contribution to one aggregation step.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalUpdate {
    pub client_id: String,
    /// `F_k^q · L·(w − w̄_k)`.
    pub delta: ParamVector,
    /// `q·F_k^(q−1)·‖L·(w − w̄_k)‖² + L·F_k^q`.
    pub h: f64,
    /// Training loss F_k at the incoming global weights.
    pub loss: f64,
}

/// Trains locally from `global` and forms the q-FedAvg update.
pub fn local_update(
    global: &LstmParams,
    client: &ClientState,
    config: &QConfig,
) -> Result<LocalUpdate, QfflError> {
    let loss = mse_loss(global, &client.dataset.train).map_err(|source| QfflError::Client {
        client: client.id().to_string(),
        source,
    })?;
    local_update_at_loss(global, client, config, loss)
}

/// [`local_update`] with F_k already evaluated at `global`.
pub(crate) fn local_update_at_loss(
    global: &LstmParams,
    client: &ClientState,
    config: &QConfig,
    loss: f64,
) -> Result<LocalUpdate, QfflError> {
    config.validate()?;
    let client_err = |source| QfflError::Client {
        client: client.id().to_string(),
        source,
    };
    let (trained, _) =
        sgd_epochs(global, &client.dataset.train, &config.train).map_err(client_err)?;

    let q = config.q;
    let l = config.lipschitz();
    let w = global.flatten();
    let w_bar = trained.flatten();
    let mut step = ParamVector::zeros_like(&w);
    for ((s, a), b) in step.values.iter_mut().zip(&w.values).zip(&w_bar.values) {
        *s = l * (a - b);
    }

    let weight = q_weight(loss, q);
    let curvature = if q == 0.0 {
        0.0
    } else if loss == 0.0 {
        if q < 1.0 {
            return Err(QfflError::ZeroLossFractionalQ(client.id().to_string()));
        }
        0.0
    } else {
        q * loss.powf(q - 1.0) * step.norm_squared()
    };
    let h = curvature + l * weight;
    step.scale(weight);
    Ok(LocalUpdate {
        client_id: client.id().to_string(),
        delta: step,
        h,
        loss,
    })
}

/// `w ← w − (Σ_k Δ_k) / (Σ_k h_k)`, summing in client-id order.
pub fn qffl_aggregate(
    global: &LstmParams,
    updates: &[LocalUpdate],
) -> Result<LstmParams, QfflError> {
    if updates.is_empty() {
        return Err(QfflError::NoClients);
    }
    let mut ordered: Vec<&LocalUpdate> = updates.iter().collect();
    ordered.sort_by(|a, b| a.client_id.cmp(&b.client_id));

    let w = global.flatten();
    let mut delta_sum = ParamVector::zeros_like(&w);
    let mut h_sum = 0.0;
    for u in &ordered {
        delta_sum.axpy(1.0, &u.delta)?;
        h_sum += u.h;
    }
    if !(h_sum > 0.0) || !h_sum.is_finite() {
        return Err(QfflError::DegenerateRound(h_sum));
    }
    let mut next = w;
    for (v, d) in next.values.iter_mut().zip(&delta_sum.values) {
        *v -= d / h_sum;
    }
    Ok(unflatten(&next, &global.shape)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lstm::{init_params, ModelShape, TrainConfig};
    use crate::trace::{FederatedDataset, NoiseSpec, Pattern, ScalerParams};

    fn client(id: &str, offset: f64, n: usize) -> ClientState {
        let train: Vec<Pattern> = (0..n)
            .map(|i| {
                let x = (i as f64 * 0.7 + offset).sin();
                Pattern {
                    input: vec![x, 0.5 * x, -x],
                    target: x * 0.8 + offset * 0.1,
                }
            })
            .collect();
        ClientState {
            dataset: FederatedDataset {
                client_id: id.into(),
                window_length: 2,
                n_k: n,
                scaler: ScalerParams {
                    mean: 0.0,
                    std: 1.0,
                },
                noise: NoiseSpec::none(),
                train: train.clone(),
                val: train.clone(),
                test: train,
            },
            weight: 0.5,
        }
    }

    fn config(q: f64, lr: f64) -> QConfig {
        QConfig {
            q,
            rounds: 1,
            lipschitz: Some(10.0),
            train: TrainConfig {
                learning_rate: lr,
                batch_size: 64,
                local_epochs: 1,
                seed: 3,
                clip_norm: None,
            },
            early_stop_patience: None,
        }
    }

    #[test]
    fn objective_examples() {
        let p = [0.5, 0.5];
        assert_eq!(
            global_objective(&[0.2, 0.4], &p, 0.0).unwrap(),
            0.5 * 0.2 + 0.5 * 0.4
        );
        let q1 = global_objective(&[0.2, 0.4], &p, 1.0).unwrap();
        assert!((q1 - 0.05).abs() < 1e-15);
        assert_eq!(global_objective(&[0.0, 0.0], &p, 3.0).unwrap(), 0.0);
        assert!(matches!(
            global_objective(&[-0.1, 0.2], &p, 1.0),
            Err(QfflError::NegativeLoss(_))
        ));
    }

    #[test]
    fn q_zero_update_ignores_loss() {
        let c = client("a", 0.3, 20);
        let w = init_params(&ModelShape::new(vec![3]), 1).unwrap();
        let cfg = config(0.0, 0.05);
        let u = local_update(&w, &c, &cfg).unwrap();
        assert_eq!(u.h, 10.0);
        let (trained, _) = sgd_epochs(&w, &c.dataset.train, &cfg.train).unwrap();
        for ((d, a), b) in u
            .delta
            .values
            .iter()
            .zip(w.flatten().values)
            .zip(trained.flatten().values)
        {
            assert_eq!(*d, 10.0 * (a - b));
        }
    }

    #[test]
    fn zero_learning_rate_gives_zero_delta() {
        let c = client("a", 0.3, 20);
        let w = init_params(&ModelShape::new(vec![3]), 1).unwrap();
        let u = local_update(&w, &c, &config(2.0, 0.0)).unwrap();
        assert!(u.delta.values.iter().all(|&d| d == 0.0));
        assert!((u.h - 10.0 * u.loss.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn estimator_hand_value() {
        // q = 2, F = 0.5, ‖Δw‖² = 4, L = 10.
        let (q, f, l, norm2): (f64, f64, f64, f64) = (2.0, 0.5, 10.0, 4.0);
        let h = q * f.powf(q - 1.0) * norm2 + l * f.powf(q);
        assert_eq!(h, 6.5);
        assert_eq!(q_weight(f, q), 0.25);

        let c = client("a", 0.7, 24);
        let w = init_params(&ModelShape::new(vec![2]), 5).unwrap();
        let cfg = config(q, 0.05);
        let u = local_update(&w, &c, &cfg).unwrap();
        let f = mse_loss(&w, &c.dataset.train).unwrap();
        let (trained, _) = sgd_epochs(&w, &c.dataset.train, &cfg.train).unwrap();
        let dw: Vec<f64> = w
            .iter()
            .zip(trained.iter())
            .map(|(a, b)| l * (a - b))
            .collect();
        let norm2: f64 = dw.iter().map(|d| d * d).sum();
        let expected = q * f * norm2 + l * f * f;
        assert!((u.h - expected).abs() <= 1e-12 * expected);
        for (d, e) in u.delta.values.iter().zip(&dw) {
            assert!((d - f * f * e).abs() <= 1e-15_f64.max(1e-12 * e.abs()));
        }
    }

    #[test]
    fn aggregate_examples() {
        let shape = ModelShape::new(vec![1]);
        let w = init_params(&shape, 4).unwrap();
        let n = shape.param_count();
        let tag = shape.fingerprint();
        let upd = |id: &str, v: f64, h: f64| LocalUpdate {
            client_id: id.into(),
            delta: ParamVector {
                values: vec![v; n],
                shape_tag: tag.clone(),
            },
            h,
            loss: 1.0,
        };
        let same = qffl_aggregate(&w, &[upd("a", 0.0, 1.0), upd("b", 0.0, 2.0)]).unwrap();
        assert_eq!(same, w);
        let moved = qffl_aggregate(&w, &[upd("a", 2.0, 1.0), upd("b", 4.0, 1.0)]).unwrap();
        for (a, b) in w.iter().zip(moved.iter()) {
            assert!((a - 3.0 - b).abs() < 1e-12);
        }
        assert!(matches!(
            qffl_aggregate(&w, &[upd("a", 1.0, 0.0)]),
            Err(QfflError::DegenerateRound(_))
        ));
    }

    #[test]
    fn q_zero_full_batch_is_fedavg() {
        let shape = ModelShape::new(vec![2, 2]);
        let w = init_params(&shape, 9).unwrap();
        let clients = [client("a", 0.1, 16), client("b", 1.3, 16)];
        let mut cfg = config(0.0, 0.1);
        cfg.lipschitz = None;
        let updates: Vec<LocalUpdate> = clients
            .iter()
            .map(|c| local_update(&w, c, &cfg).unwrap())
            .collect();
        let next = qffl_aggregate(&w, &updates).unwrap();
        let steps: Vec<LstmParams> = clients
            .iter()
            .map(|c| sgd_epochs(&w, &c.dataset.train, &cfg.train).unwrap().0)
            .collect();
        for (i, v) in next.iter().enumerate() {
            let avg = steps.iter().map(|s| s.flatten().values[i]).sum::<f64>() / 2.0;
            assert!((v - avg).abs() < 1e-10);
        }
    }

    #[test]
    fn client_order_is_irrelevant() {
        let shape = ModelShape::new(vec![3]);
        let w = init_params(&shape, 2).unwrap();
        let clients = [
            client("x", 0.0, 12),
            client("m", 0.9, 12),
            client("b", 2.0, 12),
        ];
        let cfg = config(4.0, 0.05);
        let updates: Vec<LocalUpdate> = clients
            .iter()
            .map(|c| local_update(&w, c, &cfg).unwrap())
            .collect();
        let mut reversed = updates.clone();
        reversed.reverse();
        let a = qffl_aggregate(&w, &updates).unwrap();
        let b = qffl_aggregate(&w, &reversed).unwrap();
        let bits = |p: &LstmParams| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn larger_q_favors_higher_loss() {
        let (hi, lo) = (0.4, 0.1);
        let mut prev = q_weight(hi, 0.0) / q_weight(lo, 0.0);
        for q in [0.5, 1.0, 2.0, 5.0, 10.0] {
            let ratio = q_weight(hi, q) / q_weight(lo, q);
            assert!(ratio > prev);
            prev = ratio;
        }
    }

    #[test]
    fn zero_loss_edge_cases() {
        let mut c = client("z", 0.0, 4);
        for p in &mut c.dataset.train {
            p.target = 0.0;
            p.input = vec![0.0; 3];
        }
        let shape = ModelShape::new(vec![2]);
        let w = crate::lstm::LstmParams::zeros(&shape).unwrap();
        let u = local_update(&w, &c, &config(2.0, 0.1)).unwrap();
        assert_eq!(u.loss, 0.0);
        assert_eq!(u.h, 0.0);
        let u0 = local_update(&w, &c, &config(0.0, 0.1)).unwrap();
        assert_eq!(u0.h, 10.0);
        assert!(matches!(
            local_update(&w, &c, &config(0.5, 0.1)),
            Err(QfflError::ZeroLossFractionalQ(_))
        ));
    }
}
