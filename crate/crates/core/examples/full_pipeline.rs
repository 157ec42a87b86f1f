//! Runs every stage on the desk preset, then reruns from the manifest and
//! confirms the tables match byte for byte.
//!
//!     cargo run --release --example full_pipeline [-- <out_dir>]

use std::path::PathBuf;

use fairfed::experiment::{run_experiment, ExperimentConfig, Manifest, MANIFEST_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("fairfed-pipeline"));
    let mut config = ExperimentConfig::desk();
    config.out_dir = out.clone();
    let report = run_experiment(&config)?;

    println!(
        "{:>4} {:>9} {:>9} {:>9}",
        "q", "CV loss", "CV QoS", "CV(û,ô)*"
    );
    for f in &report.fairness {
        println!(
            "{:>4} {:>9.2} {:>9.2} {:>9.2}",
            f.q, f.cv_loss, f.cv_qos, f.cv_ou
        );
    }
    println!("* reconstructed two-sample CV of the mean under/over provisioning");

    let manifest = Manifest::load(&out.join(MANIFEST_FILE))?;
    println!(
        "manifest: config {} with {} outputs",
        &manifest.config_sha256[..12],
        manifest.outputs.len()
    );
    let mut again = manifest.config.clone();
    again.out_dir = out.join("rerun");
    run_experiment(&again)?;
    for name in [
        "table_losses.csv",
        "table_provisioning.csv",
        "fairness_summary.csv",
    ] {
        let same = std::fs::read(out.join(name))? == std::fs::read(again.out_dir.join(name))?;
        println!("{name}: {}", if same { "identical" } else { "DIFFERENT" });
    }
    Ok(())
}
