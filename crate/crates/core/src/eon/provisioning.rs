use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{first_fit_allocate, shortest_path, EonError, SlotInterval, SpectrumGrid, Topology};

/// Capacity of one 12.5 GHz slot under BPSK.
pub const GBPS_PER_SLOT: f64 = 10.0;

/// Slots needed to carry `rate` Gbps: `ceil(rate / 10)`. Negative and NaN
/// rates need no slots.
pub fn gbps_to_slots(rate: f64) -> u64 {
    let rate = rate.max(0.0);
    (rate / GBPS_PER_SLOT).ceil() as u64
}

/// Over/under-provisioning magnitudes of one connection, in slot-instants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provisioning {
    pub under: u64,
    pub over: u64,
}

/// Sums the surplus of `predicted` over `actual` (over-provisioning) and
/// the deficit (under-provisioning) across all instants.
pub fn provisioning(predicted: &[u64], actual: &[u64]) -> Result<Provisioning, EonError> {
    if predicted.len() != actual.len() {
        return Err(EonError::LengthMismatch {
            predicted: predicted.len(),
            actual: actual.len(),
        });
    }
    let mut p = Provisioning::default();
    for (&yhat, &y) in predicted.iter().zip(actual) {
        if yhat > y {
            p.over += yhat - y;
        } else {
            p.under += y - yhat;
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionRequest {
    pub connection_id: String,
    pub source: String,
    pub destination: String,
    pub predicted_slots: Vec<u64>,
    pub actual_slots: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionProvisioning {
    pub connection_id: String,
    pub under: u64,
    pub over: u64,
}

/// Per-connection provisioning and the averages û, ô.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisioningReport {
    pub connections: Vec<ConnectionProvisioning>,
    pub mean_under: f64,
    pub mean_over: f64,
}

impl ProvisioningReport {
    pub fn from_connections(connections: Vec<ConnectionProvisioning>) -> Self {
        let m = connections.len().max(1) as f64;
        let mean_under = connections.iter().map(|c| c.under as f64).sum::<f64>() / m;
        let mean_over = connections.iter().map(|c| c.over as f64).sum::<f64>() / m;
        Self {
            connections,
            mean_under,
            mean_over,
        }
    }

    pub fn under(&self) -> Vec<f64> {
        self.connections.iter().map(|c| c.under as f64).collect()
    }

    pub fn over(&self) -> Vec<f64> {
        self.connections.iter().map(|c| c.over as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub connection_id: String,
    pub route: Vec<String>,
    /// `None` when the connection never needs a slot.
    pub interval: Option<(u64, u64)>,
}

#[derive(Debug, Clone)]
pub struct RsaOutcome {
    pub report: ProvisioningReport,
    pub allocations: Vec<AllocationRecord>,
    pub grid: SpectrumGrid,
}

impl RsaOutcome {
    /// Allocation log as CSV: `connection,route,slot_start,slot_end`, route
    /// nodes joined by `-`.
    pub fn allocation_log_csv(&self) -> String {
        let mut out = String::from("connection,route,slot_start,slot_end\n");
        for a in &self.allocations {
            let (s, e) = match a.interval {
                Some((s, e)) => (s.to_string(), e.to_string()),
                None => (String::new(), String::new()),
            };
            let _ = writeln!(out, "{},{},{s},{e}", a.connection_id, a.route.join("-"));
        }
        out
    }
}

/// Routes every connection on its shortest path, allocates first-fit
/// spectrum sized to its peak predicted slot count, and accounts
/// per-instant over/under-provisioning against the actual slots.
pub fn run_rsa_evaluation(
    topology: &Topology,
    connections: &[ConnectionRequest],
) -> Result<RsaOutcome, EonError> {
    let mut grid = SpectrumGrid::new();
    let mut allocations = Vec::with_capacity(connections.len());
    let mut rows = Vec::with_capacity(connections.len());
    for (owner, c) in connections.iter().enumerate() {
        let route = shortest_path(topology, &c.source, &c.destination)?;
        let peak = c.predicted_slots.iter().copied().max().unwrap_or(0);
        let interval = if peak > 0 {
            let SlotInterval { start, end } = first_fit_allocate(&mut grid, &route, peak, owner)?;
            Some((start, end))
        } else {
            None
        };
        allocations.push(AllocationRecord {
            connection_id: c.connection_id.clone(),
            route: route
                .node_names(topology)
                .iter()
                .map(|s| s.to_string())
                .collect(),
            interval,
        });
        let p = provisioning(&c.predicted_slots, &c.actual_slots)?;
        rows.push(ConnectionProvisioning {
            connection_id: c.connection_id.clone(),
            under: p.under,
            over: p.over,
        });
    }
    Ok(RsaOutcome {
        report: ProvisioningReport::from_connections(rows),
        allocations,
        grid,
    })
}

/// Picks one destination per source uniformly among the other nodes.
pub fn choose_destinations(
    topology: &Topology,
    sources: &[String],
    seed: u64,
) -> Result<Vec<String>, EonError> {
    let nodes = topology.nodes();
    if nodes.len() < 2 {
        return Err(EonError::InvalidTopology("need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sources
        .iter()
        .map(|s| {
            let si = topology.node_index(s)?;
            let mut pick = rng.random_range(0..nodes.len() - 1);
            if pick >= si {
                pick += 1;
            }
            Ok(nodes[pick].clone())
        })
        .collect()
}
