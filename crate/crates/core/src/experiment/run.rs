use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::read;
use super::{validate_config, ExperimentConfig, ExperimentError, Manifest, TraceSource};
use crate::eon::{
    choose_destinations, gbps_to_slots, run_rsa_evaluation, ConnectionRequest, RsaOutcome, Topology,
};
use crate::fairness::{cv_loss, cv_ou, cv_qos, FairnessSummary};
use crate::lstm::{init_params, predict_batch, LstmParams};
use crate::qffl::{
    evaluate_clients, round_log_csv, train_federated_with, ClientState, RoundRecord,
};
use crate::trace::{
    build_federated_datasets, generate_synthetic_traces, parse_demand_matrices, ClientSpec,
    FederatedDataset,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Train,
    Rsa,
    Metrics,
    All,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Rsa => "rsa",
            Stage::Metrics => "metrics",
            Stage::All => "all",
        })
    }
}

/// Test losses of every client and their mean f̄ for one q.
#[derive(Debug, Clone, PartialEq)]
pub struct LossRow {
    pub q: f64,
    pub losses: Vec<f64>,
    pub mean: f64,
}

/// Per-connection u_k, o_k and û, ô for one q.
#[derive(Debug, Clone, PartialEq)]
pub struct ProvisioningRow {
    pub q: f64,
    pub under: Vec<f64>,
    pub over: Vec<f64>,
    pub mean_under: f64,
    pub mean_over: f64,
}

#[derive(Debug, Clone)]
pub struct QRun {
    pub q: f64,
    pub params: LstmParams,
    pub records: Vec<RoundRecord>,
}

/// What a stage produced. Fields a stage does not touch stay empty.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub client_ids: Vec<String>,
    pub datasets: Vec<FederatedDataset>,
    pub runs: Vec<QRun>,
    pub losses: Vec<LossRow>,
    pub provisioning: Vec<ProvisioningRow>,
    pub fairness: Vec<FairnessSummary>,
    /// Files written, relative to `out_dir`.
    pub outputs: Vec<PathBuf>,
}

/// Runs the whole pipeline.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, ExperimentError> {
    run_stage(config, Stage::All)
}

/// Runs one stage into `config.out_dir` and refreshes the manifest.
///
/// `train` and `rsa` rebuild the datasets from the configuration; `rsa`
/// reads the final checkpoints written by `train`; `metrics` reads the
/// loss and provisioning tables.
pub fn run_stage(config: &ExperimentConfig, stage: Stage) -> Result<RunReport, ExperimentError> {
    let violations = validate_config(config);
    if !violations.is_empty() {
        return Err(ExperimentError::InvalidConfig(violations));
    }
    let out = Output::create(&config.out_dir)?;
    let mut report = RunReport {
        out_dir: config.out_dir.clone(),
        client_ids: config.clients.clone(),
        ..Default::default()
    };
    let at = |stage| {
        move |e: ExperimentError| ExperimentError::Stage {
            stage,
            source: Box::new(e),
        }
    };

    let needs_data = stage != Stage::Metrics;
    if needs_data {
        report.datasets = build_datasets(config).map_err(at(Stage::Ingest))?;
    }
    if stage == Stage::Ingest {
        for d in &report.datasets {
            let text = d.to_snapshot_json()?;
            report
                .outputs
                .push(out.write(&format!("datasets/{}.json", d.client_id), &text)?);
        }
    }
    if matches!(stage, Stage::Train | Stage::All) {
        train_stage(config, &out, &mut report).map_err(at(Stage::Train))?;
    }
    if matches!(stage, Stage::Rsa | Stage::All) {
        rsa_stage(config, &out, &mut report).map_err(at(Stage::Rsa))?;
    }
    if matches!(stage, Stage::Metrics | Stage::All) {
        metrics_stage(config, &out, &mut report).map_err(at(Stage::Metrics))?;
    }

    Manifest::record(config, stage, &config.out_dir)?;
    Ok(report)
}

/// Loads the configured trace and builds one dataset per client.
pub fn build_datasets(config: &ExperimentConfig) -> Result<Vec<FederatedDataset>, ExperimentError> {
    let series = match &config.source {
        TraceSource::Synthetic { spec } => generate_synthetic_traces(spec)?,
        TraceSource::File { path, format } => parse_demand_matrices(&read(path)?, *format)?,
    };
    let specs: Vec<ClientSpec> = config
        .clients
        .iter()
        .zip(&config.sizes)
        .zip(&config.noise)
        .map(|((node, &size), &noise)| ClientSpec {
            node: node.clone(),
            size,
            noise,
        })
        .collect();
    Ok(build_federated_datasets(
        &series,
        &specs,
        config.window,
        config.direction,
    )?)
}

fn q_label(q: f64) -> String {
    format!("q{q}")
}

fn train_stage(
    config: &ExperimentConfig,
    out: &Output,
    report: &mut RunReport,
) -> Result<(), ExperimentError> {
    let clients = ClientState::from_datasets(report.datasets.clone())?;
    let shape = config.shape();
    let initial = init_params(&shape, config.train.seed)?;

    let runs: Vec<QRun> = config
        .q_list
        .par_iter()
        .map(|&q| {
            let label = q_label(q);
            let every = config.checkpoint_every;
            let run = train_federated_with(
                initial.clone(),
                &clients,
                &config.q_config(q),
                |record, params| {
                    if every > 0 && record.round % every == 0 {
                        let name = format!("checkpoints/{label}_round{:04}.ckpt", record.round);
                        out.write(&name, &params.to_checkpoint())
                            .map_err(std::io::Error::other)?;
                    }
                    Ok(())
                },
            )?;
            Ok(QRun {
                q,
                params: run.params,
                records: run.records,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut table = header("q", &config.clients, &["F_"], "f_bar");
    for run in &runs {
        let label = q_label(run.q);
        report.outputs.push(out.write(
            &format!("rounds_{label}.csv"),
            &round_log_csv(&config.clients, &run.records),
        )?);
        report.outputs.push(out.write(
            &format!("checkpoints/{label}_final.ckpt"),
            &run.params.to_checkpoint(),
        )?);
        let eval = evaluate_clients(&run.params, &clients)?;
        row(&mut table, run.q, eval.losses.iter().copied(), &[eval.mean]);
        report.losses.push(LossRow {
            q: run.q,
            losses: eval.losses,
            mean: eval.mean,
        });
    }
    report.outputs.push(out.write("table_losses.csv", &table)?);
    report.runs = runs;
    Ok(())
}

/// One connection per client from its node to its drawn destination, with
/// slot series from the model's test predictions and the test targets.
pub fn connection_requests(
    params: &LstmParams,
    datasets: &[FederatedDataset],
    destinations: &[String],
) -> Result<Vec<ConnectionRequest>, ExperimentError> {
    datasets
        .iter()
        .zip(destinations)
        .map(|(d, dest)| {
            let predicted = predict_batch(params, &d.test)?
                .into_iter()
                .map(|y| gbps_to_slots(d.scaler.inverse(y).max(0.0)))
                .collect();
            let actual = d
                .test
                .iter()
                .map(|p| gbps_to_slots(d.scaler.inverse(p.target).max(0.0)))
                .collect();
            Ok(ConnectionRequest {
                connection_id: d.client_id.clone(),
                source: d.client_id.clone(),
                destination: dest.clone(),
                predicted_slots: predicted,
                actual_slots: actual,
            })
        })
        .collect()
}

fn rsa_stage(
    config: &ExperimentConfig,
    out: &Output,
    report: &mut RunReport,
) -> Result<(), ExperimentError> {
    let topology: Topology = config.load_topology()?;
    let destinations = choose_destinations(&topology, &config.clients, config.rsa_seed)?;
    let models: Vec<(f64, LstmParams)> = if report.runs.is_empty() {
        config
            .q_list
            .iter()
            .map(|&q| {
                let path = out.path(&format!("checkpoints/{}_final.ckpt", q_label(q)));
                let params =
                    LstmParams::load_checkpoint(&path).map_err(|source| ExperimentError::Io {
                        path: path.clone(),
                        source,
                    })?;
                Ok((q, params))
            })
            .collect::<Result<_, ExperimentError>>()?
    } else {
        report
            .runs
            .iter()
            .map(|r| (r.q, r.params.clone()))
            .collect()
    };

    let mut table = header("q", &config.clients, &["u_", "o_"], "u_hat,o_hat");
    for (q, params) in &models {
        let requests = connection_requests(params, &report.datasets, &destinations)?;
        let outcome: RsaOutcome = run_rsa_evaluation(&topology, &requests)?;
        if let Some((link, a, b)) = outcome.grid.find_overlap() {
            return Err(ExperimentError::Invariant(format!(
                "overlapping allocations {a:?} and {b:?} on link {link:?}"
            )));
        }
        report.outputs.push(out.write(
            &format!("allocations_{}.csv", q_label(*q)),
            &outcome.allocation_log_csv(),
        )?);
        let r = &outcome.report;
        let pairs = r
            .connections
            .iter()
            .flat_map(|c| [c.under as f64, c.over as f64]);
        row(&mut table, *q, pairs, &[r.mean_under, r.mean_over]);
        report.provisioning.push(ProvisioningRow {
            q: *q,
            under: r.under(),
            over: r.over(),
            mean_under: r.mean_under,
            mean_over: r.mean_over,
        });
    }
    report
        .outputs
        .push(out.write("table_provisioning.csv", &table)?);
    Ok(())
}

fn metrics_stage(
    config: &ExperimentConfig,
    out: &Output,
    report: &mut RunReport,
) -> Result<(), ExperimentError> {
    let m = config.clients.len();
    let losses = read_table(&out.path("table_losses.csv"), m + 2)?;
    let prov = read_table(&out.path("table_provisioning.csv"), 2 * m + 3)?;
    let mut table = String::from("q,cv_loss,cv_qos,cv_ou_reconstructed\n");
    for q in &config.q_list {
        let find = |rows: &[Vec<f64>], name: &str| {
            rows.iter().find(|r| r[0] == *q).cloned().ok_or_else(|| {
                ExperimentError::TableFormat(format!("{name} has no row for q = {q}"))
            })
        };
        let l = find(&losses, "table_losses.csv")?;
        let p = find(&prov, "table_provisioning.csv")?;
        let under: Vec<f64> = (0..m).map(|k| p[1 + 2 * k]).collect();
        let over: Vec<f64> = (0..m).map(|k| p[2 + 2 * k]).collect();
        let summary = FairnessSummary {
            q: *q,
            cv_loss: cv_loss(&l[1..=m])?,
            cv_qos: cv_qos(&under, &over)?,
            cv_ou: cv_ou(p[2 * m + 1], p[2 * m + 2])?,
        };
        let _ = writeln!(
            table,
            "{},{},{},{}",
            summary.q, summary.cv_loss, summary.cv_qos, summary.cv_ou
        );
        report.fairness.push(summary);
    }
    report
        .outputs
        .push(out.write("fairness_summary.csv", &table)?);
    Ok(())
}

fn header(first: &str, ids: &[String], prefixes: &[&str], tail: &str) -> String {
    let mut h = first.to_string();
    for id in ids {
        for p in prefixes {
            let _ = write!(h, ",{p}{id}");
        }
    }
    let _ = writeln!(h, ",{tail}");
    h
}

fn row(table: &mut String, q: f64, values: impl Iterator<Item = f64>, tail: &[f64]) {
    let _ = write!(table, "{q}");
    for v in values.chain(tail.iter().copied()) {
        let _ = write!(table, ",{v}");
    }
    table.push('\n');
}

fn read_table(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>, ExperimentError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != columns {
            return Err(ExperimentError::TableFormat(format!(
                "{}: expected {columns} columns, found {}",
                path.display(),
                record.len()
            )));
        }
        let values = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExperimentError::TableFormat(format!("{}: {e}", path.display())))?;
        rows.push(values);
    }
    Ok(rows)
}

/// Output directory writer.
struct Output {
    root: PathBuf,
}

impl Output {
    fn create(root: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(root).map_err(|source| ExperimentError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, ExperimentError> {
        let path = self.path(name);
        let io = |source| ExperimentError::Io {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        std::fs::write(&path, contents).map_err(io)?;
        Ok(PathBuf::from(name))
    }
}
