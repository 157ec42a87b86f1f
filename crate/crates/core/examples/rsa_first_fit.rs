//! Routes connections over Abilene, packs their spectrum first-fit and
//! accounts over- and under-provisioning against actual demand.
//!
//!     cargo run --example rsa_first_fit

use fairfed::eon::{gbps_to_slots, run_rsa_evaluation, shortest_path, ConnectionRequest, Topology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let abilene = Topology::abilene();
    println!(
        "Abilene: {} nodes, {} links",
        abilene.nodes().len(),
        abilene.links().len()
    );
    let route = shortest_path(&abilene, "STTLng", "NYCMng")?;
    println!(
        "STTLng -> NYCMng: {} ({} hops)",
        route.node_names(&abilene).join(" - "),
        route.cost
    );

    let slots = |gbps: &[f64]| gbps.iter().map(|&g| gbps_to_slots(g)).collect::<Vec<_>>();
    let connections = vec![
        ConnectionRequest {
            connection_id: "c1".into(),
            source: "STTLng".into(),
            destination: "NYCMng".into(),
            predicted_slots: slots(&[32.0, 41.5, 28.0]),
            actual_slots: slots(&[30.0, 47.0, 28.0]),
        },
        ConnectionRequest {
            connection_id: "c2".into(),
            source: "SNVAng".into(),
            destination: "CHINng".into(),
            predicted_slots: slots(&[18.0, 22.0, 9.5]),
            actual_slots: slots(&[12.0, 25.0, 8.0]),
        },
        ConnectionRequest {
            connection_id: "c3".into(),
            source: "DNVRng".into(),
            destination: "KSCYng".into(),
            predicted_slots: slots(&[5.0, 5.0, 5.0]),
            actual_slots: slots(&[5.0, 5.0, 5.0]),
        },
    ];
    let outcome = run_rsa_evaluation(&abilene, &connections)?;
    print!("{}", outcome.allocation_log_csv());
    for c in &outcome.report.connections {
        println!("{}: u = {}, o = {}", c.connection_id, c.under, c.over);
    }
    println!(
        "u_hat = {:.2}, o_hat = {:.2}, overlapping allocations: {}",
        outcome.report.mean_under,
        outcome.report.mean_over,
        outcome.grid.find_overlap().is_some()
    );
    Ok(())
}
