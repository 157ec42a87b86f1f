//! Turns demand matrices into federated client datasets: synthetic Abilene
//! traffic, an SNDlib snippet, per-node aggregation, noise and windowing.
//!
//!     cargo run --example ingest_traces

use fairfed::trace::{
    aggregate_node_traffic, build_federated_datasets, generate_synthetic_traces,
    parse_demand_matrices, ClientSpec, DemandFormat, Direction, NoiseDistribution, NoiseSpec,
    SyntheticSpec,
};

const SNDLIB: &str = "?SNDlib native format; type: demand matrix; version: 1.0
META (
  granularity = 5min
  time = 20040301-0000
  unit = MBITPERSEC
)
NODES (
  ATLAng ( -84.38 33.75 )
  CHINng ( -87.62 41.83 )
  NYCMng ( -73.94 40.67 )
)
DEMANDS (
  ATLAng_CHINng ( ATLAng CHINng ) 1 1250.0 UNLIMITED
  NYCMng_CHINng ( NYCMng CHINng ) 1 800.5 UNLIMITED
  CHINng_ATLAng ( CHINng ATLAng ) 1 300.0 UNLIMITED
)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let snippet = parse_demand_matrices(SNDLIB, DemandFormat::SndlibNative)?;
    let into_chicago = aggregate_node_traffic(&snippet, "CHINng", Direction::Incoming)?;
    println!(
        "SNDlib snippet: {} nodes, CHINng receives {:.4} Gbps",
        snippet.node_count(),
        into_chicago.values[0]
    );

    // Four days of 5-minute samples.
    let series = generate_synthetic_traces(&SyntheticSpec::abilene_default(288 * 4, 11))?;
    let clients = vec![
        ClientSpec {
            node: "ATLAM5".into(),
            size: 600,
            noise: NoiseSpec::new(
                NoiseDistribution::Gaussian {
                    mean: 10.0,
                    std: 2.0,
                },
                1,
            ),
        },
        ClientSpec {
            node: "CHINng".into(),
            size: 300,
            noise: NoiseSpec::new(
                NoiseDistribution::Gamma {
                    shape: 1.0,
                    scale: 3.0,
                },
                2,
            ),
        },
        ClientSpec {
            node: "STTLng".into(),
            size: 900,
            noise: NoiseSpec::none(),
        },
    ];
    let datasets = build_federated_datasets(&series, &clients, 24, Direction::Incoming)?;
    for d in &datasets {
        let first = &d.train[0];
        println!(
            "{:<7} n_k={:<4} train/val/test = {}/{}/{}  scaler mean {:.2} Gbps, std {:.2}  first target {:.3} -> {:.2} Gbps",
            d.client_id,
            d.n_k,
            d.train.len(),
            d.val.len(),
            d.test.len(),
            d.scaler.mean,
            d.scaler.std,
            first.target,
            d.scaler.inverse(first.target)
        );
    }
    Ok(())
}
