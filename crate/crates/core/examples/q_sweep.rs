//! Trains the desk-scale federation for every q and shows how the spread
//! of client test losses responds.
//!
//!     cargo run --release --example q_sweep

use fairfed::experiment::{run_stage, ExperimentConfig, Stage};
use fairfed::fairness::cv_loss;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ExperimentConfig::desk();
    config.out_dir = std::env::temp_dir().join("fairfed-q-sweep");
    let report = run_stage(&config, Stage::Train)?;

    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>9}  per-client test MSE",
        "q", "round 1", "last 10", "f_bar", "cv_loss"
    );
    for (run, row) in report.runs.iter().zip(&report.losses) {
        let first = run.records[0].train_objective;
        let tail = &run.records[run.records.len().saturating_sub(10)..];
        let last = tail.iter().map(|r| r.train_objective).sum::<f64>() / tail.len() as f64;
        let losses: Vec<String> = row.losses.iter().map(|l| format!("{l:.4}")).collect();
        println!(
            "{:>5} {first:>10.4} {last:>10.4} {:>10.4} {:>9.2}  {}",
            run.q,
            row.mean,
            cv_loss(&row.losses)?,
            losses.join(" ")
        );
    }
    println!("outputs in {}", report.out_dir.display());
    Ok(())
}
