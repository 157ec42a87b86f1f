use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairfed::experiment::{
    run_stage, ExperimentConfig, Manifest, Preset, RunReport, Stage, TraceSource,
};
use fairfed::trace::{DemandFormat, Direction};

#[derive(Parser)]
#[command(
    name = "fairfed",
    version,
    about = "q-fair federated traffic forecasting and EON provisioning"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand, Clone, Copy)]
enum Verb {
    /// Build the client datasets and write snapshots.
    Ingest,
    /// Train one federated model per q.
    Train,
    /// Allocate spectrum from the trained models' test predictions.
    Rsa,
    /// Compute fairness summaries from the loss and provisioning tables.
    Metrics,
    /// Run every stage.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Sndlib,
}

#[derive(clap::Args)]
struct Options {
    /// Starting configuration.
    #[arg(long, global = true, value_enum, default_value = "paper")]
    preset: PresetArg,
    /// TOML file overriding preset fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Rerun the configuration recorded in a manifest.
    #[arg(long, global = true, conflicts_with_all = ["preset", "config"])]
    manifest: Option<PathBuf>,
    /// Master seed; re-derives every other seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated q values.
    #[arg(long = "q", global = true, value_delimiter = ',')]
    q_list: Option<Vec<f64>>,
    #[arg(long, global = true)]
    rounds: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Comma-separated LSTM layer widths.
    #[arg(long, global = true, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Window length κ.
    #[arg(long, global = true)]
    window: Option<usize>,
    /// Comma-separated client node names.
    #[arg(long, global = true, value_delimiter = ',')]
    clients: Option<Vec<String>>,
    /// Comma-separated pattern counts per client.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Demand-matrix trace file instead of synthetic traffic.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: FormatArg,
    /// Aggregate outgoing instead of incoming demands.
    #[arg(long, global = true)]
    outgoing: bool,
    /// Topology file (`NODES` and `LINKS` sections).
    #[arg(long, global = true)]
    topology: Option<PathBuf>,
    #[arg(long, global = true)]
    rsa_seed: Option<u64>,
    /// Step constant L of the aggregation.
    #[arg(long, global = true)]
    lipschitz: Option<f64>,
    #[arg(long, global = true)]
    checkpoint_every: Option<usize>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

fn resolve(o: &Options) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let mut c = match &o.manifest {
        Some(path) => Manifest::load(path)?.config,
        None => {
            let base = ExperimentConfig::preset(match o.preset {
                PresetArg::Paper => Preset::Paper,
                PresetArg::Desk => Preset::Desk,
            });
            match &o.config {
                Some(path) => {
                    ExperimentConfig::from_toml_over(&std::fs::read_to_string(path)?, &base)?
                }
                None => base,
            }
        }
    };
    if let Some(seed) = o.seed {
        c.reseed(seed);
    }
    if let Some(v) = &o.q_list {
        c.q_list = v.clone();
    }
    if let Some(v) = o.rounds {
        c.rounds = v;
    }
    if let Some(v) = o.lr {
        c.train.learning_rate = v;
    }
    if let Some(v) = o.batch {
        c.train.batch_size = v;
    }
    if let Some(v) = o.epochs {
        c.train.local_epochs = v;
    }
    if let Some(v) = &o.hidden {
        c.hidden = v.clone();
    }
    if let Some(v) = o.window {
        c.window = v;
    }
    if let Some(v) = &o.clients {
        c.clients = v.clone();
    }
    if let Some(v) = &o.sizes {
        c.sizes = v.clone();
    }
    if let Some(path) = &o.trace {
        let format = match o.format {
            FormatArg::Csv => DemandFormat::Csv,
            FormatArg::Sndlib => DemandFormat::SndlibNative,
        };
        c.source = TraceSource::File {
            path: path.clone(),
            format,
        };
    }
    if o.outgoing {
        c.direction = Direction::Outgoing;
    }
    if let Some(v) = &o.topology {
        c.topology = Some(v.clone());
    }
    if let Some(v) = o.rsa_seed {
        c.rsa_seed = v;
    }
    if let Some(v) = o.lipschitz {
        c.lipschitz = Some(v);
    }
    if let Some(v) = o.checkpoint_every {
        c.checkpoint_every = v;
    }
    if let Some(v) = &o.out {
        c.out_dir = v.clone();
    }
    Ok(c)
}

fn print_report(r: &RunReport) {
    for d in &r.datasets {
        println!(
            "dataset {:<8} n_k={:<6} train={:<6} val={:<5} test={:<4} mean={:.3} std={:.3}",
            d.client_id,
            d.n_k,
            d.train.len(),
            d.val.len(),
            d.test.len(),
            d.scaler.mean,
            d.scaler.std
        );
    }
    for row in &r.losses {
        let per: Vec<String> = row.losses.iter().map(|l| format!("{l:.4}")).collect();
        println!(
            "q={:<4} test MSE f_bar={:.4}  [{}]",
            row.q,
            row.mean,
            per.join(", ")
        );
    }
    for row in &r.provisioning {
        println!(
            "q={:<4} u_hat={:.1} o_hat={:.1}",
            row.q, row.mean_under, row.mean_over
        );
    }
    if !r.fairness.is_empty() {
        println!(
            "{:<6} {:>10} {:>10} {:>28}",
            "q", "CV loss", "CV QoS", "CV(û,ô), reconstructed"
        );
        for f in &r.fairness {
            println!(
                "{:<6} {:>10.3} {:>10.3} {:>28.3}",
                f.q, f.cv_loss, f.cv_qos, f.cv_ou
            );
        }
    }
    println!("wrote {} files to {}", r.outputs.len(), r.out_dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match resolve(&cli.opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if cli.opts.print_config {
        print!("{}", config.to_toml());
        return ExitCode::SUCCESS;
    }
    let stage = match cli.verb {
        Verb::Ingest => Stage::Ingest,
        Verb::Train => Stage::Train,
        Verb::Rsa => Stage::Rsa,
        Verb::Metrics => Stage::Metrics,
        Verb::All => Stage::All,
    };
    match run_stage(&config, stage) {
        Ok(report) => {
            print_report(&report);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
