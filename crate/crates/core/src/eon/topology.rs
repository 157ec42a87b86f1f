use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::EonError;

/// Node identifiers of the Abilene backbone, in topology order.
pub const ABILENE_NODES: [&str; 12] = [
    "ATLAM5", "ATLAng", "CHINng", "DNVRng", "HSTNng", "IPLSng", "KSCYng", "LOSAng", "NYCMng",
    "SNVAng", "STTLng", "WASHng",
];

/// The bundled Abilene topology file (12 nodes, 15 bidirectional links,
/// unit hop weights).
pub const ABILENE_TOPOLOGY: &str = include_str!("../../data/abilene.topo");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Undirected weighted graph over named nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<String>,
    links: Vec<Link>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

/// A routed path: node indices from source to destination.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub nodes: Vec<usize>,
    pub cost: f64,
}

impl Route {
    /// Directed links traversed, in order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn node_names<'a>(&self, topology: &'a Topology) -> Vec<&'a str> {
        self.nodes
            .iter()
            .map(|&n| topology.nodes[n].as_str())
            .collect()
    }
}

impl Topology {
    pub fn new(nodes: Vec<String>, links: Vec<(String, String, f64)>) -> Result<Self, EonError> {
        let invalid = |m: String| Err(EonError::InvalidTopology(m));
        if nodes.is_empty() {
            return invalid("no nodes".into());
        }
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return invalid(format!("duplicate node `{n}`"));
            }
        }
        let index = |name: &str| {
            nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| EonError::UnknownNode(name.to_string()))
        };
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut resolved = Vec::with_capacity(links.len());
        for (a, b, weight) in &links {
            let (ia, ib) = (index(a)?, index(b)?);
            if ia == ib {
                return invalid(format!("self-loop at `{a}`"));
            }
            if !(*weight > 0.0 && weight.is_finite()) {
                return invalid(format!("link {a}-{b} has non-positive weight {weight}"));
            }
            if adjacency[ia].iter().any(|&(n, _)| n == ib) {
                return invalid(format!("duplicate link {a}-{b}"));
            }
            adjacency[ia].push((ib, *weight));
            adjacency[ib].push((ia, *weight));
            resolved.push(Link {
                a: ia,
                b: ib,
                weight: *weight,
            });
        }
        Ok(Self {
            nodes,
            links: resolved,
            adjacency,
        })
    }

    /// Parses a topology file: a `NODES` section with one identifier per
    /// line followed by a `LINKS` section of `node_a node_b weight` lines.
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, EonError> {
        enum Section {
            None,
            Nodes,
            Links,
        }
        let mut section = Section::None;
        let mut nodes = Vec::new();
        let mut links = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            match text {
                "NODES" => section = Section::Nodes,
                "LINKS" => section = Section::Links,
                _ => match section {
                    Section::None => {
                        return Err(EonError::Parse {
                            line,
                            message: "expected a NODES or LINKS header".into(),
                        })
                    }
                    Section::Nodes => {
                        let mut tokens = text.split_whitespace();
                        let name = tokens.next().unwrap();
                        if tokens.next().is_some() {
                            return Err(EonError::Parse {
                                line,
                                message: format!("node line `{text}` has extra fields"),
                            });
                        }
                        nodes.push(name.to_string());
                    }
                    Section::Links => {
                        let tokens: Vec<&str> = text.split_whitespace().collect();
                        let weight = match tokens.len() {
                            2 => 1.0,
                            3 => tokens[2].parse().map_err(|_| EonError::Parse {
                                line,
                                message: format!("invalid weight `{}`", tokens[2]),
                            })?,
                            _ => {
                                return Err(EonError::Parse {
                                    line,
                                    message: format!(
                                        "expected `node_a node_b weight`, found `{text}`"
                                    ),
                                })
                            }
                        };
                        links.push((tokens[0].to_string(), tokens[1].to_string(), weight));
                    }
                },
            }
        }
        Self::new(nodes, links)
    }

    pub fn abilene() -> Self {
        Self::parse(ABILENE_TOPOLOGY).expect("bundled Abilene topology is valid")
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn node_index(&self, name: &str) -> Result<usize, EonError> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| EonError::UnknownNode(name.to_string()))
    }

    fn distances_from(&self, source: usize) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Entry(f64, usize);
        impl Eq for Entry {}
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                other
                    .0
                    .total_cmp(&self.0)
                    .then_with(|| other.1.cmp(&self.1))
            }
        }
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }

        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::from([Entry(0.0, source)]);
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, w) in &self.adjacency[u] {
                let nd = d + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(Entry(nd, v));
                }
            }
        }
        dist
    }
}

fn same_cost(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Minimum-weight route by Dijkstra. Among equal-cost routes the one with
/// the lexicographically smallest sequence of node identifiers wins.
pub fn shortest_path(topology: &Topology, src: &str, dst: &str) -> Result<Route, EonError> {
    let s = topology.node_index(src)?;
    let d = topology.node_index(dst)?;
    if s == d {
        return Err(EonError::SameEndpoints(src.to_string()));
    }
    let from_src = topology.distances_from(s);
    if from_src[d].is_infinite() {
        return Err(EonError::Unreachable {
            src: src.to_string(),
            dst: dst.to_string(),
        });
    }
    let to_dst = topology.distances_from(d);
    let total = from_src[d];

    // Walk the shortest-path DAG choosing the smallest next identifier.
    let mut nodes = vec![s];
    let mut u = s;
    while u != d {
        u = topology.adjacency[u]
            .iter()
            .filter(|&&(v, w)| same_cost(from_src[u] + w + to_dst[v], total))
            .map(|&(v, _)| v)
            .min_by(|&a, &b| topology.nodes[a].cmp(&topology.nodes[b]))
            .expect("a shortest-path successor exists");
        nodes.push(u);
    }
    Ok(Route { nodes, cost: total })
}
