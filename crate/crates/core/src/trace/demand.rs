use std::collections::BTreeMap;
use std::fmt::Write as _;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::TraceError;

/// Input encodings accepted by [`parse_demand_matrices`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandFormat {
    /// `timestamp,src,dst,gbps` rows sorted by timestamp (minutes).
    Csv,
    /// One or more concatenated SNDlib native demand-matrix documents,
    /// each covering one measurement period.
    SndlibNative,
}

impl std::str::FromStr for DemandFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "sndlib" | "sndlib-native" | "native" => Ok(Self::SndlibNative),
            other => Err(format!(
                "unknown demand format `{other}` (expected csv or sndlib)"
            )),
        }
    }
}

/// Which demands contribute to a node's aggregated series.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Demands terminating at the node.
    #[default]
    Incoming,
    /// Demands originating at the node.
    Outgoing,
}

/// A time series of traffic demand matrices in Gbps.
///
/// Timestamps are in minutes and uniformly spaced. Node indices in the
/// demand maps refer to positions in [`DemandMatrixSeries::nodes`]; pairs
/// that are absent carry zero traffic.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandMatrixSeries {
    nodes: Vec<String>,
    timestamps: Vec<i64>,
    demands: Vec<BTreeMap<(usize, usize), f64>>,
}

impl DemandMatrixSeries {
    pub fn new(
        nodes: Vec<String>,
        timestamps: Vec<i64>,
        demands: Vec<BTreeMap<(usize, usize), f64>>,
    ) -> Result<Self, TraceError> {
        if timestamps.is_empty() {
            return Err(TraceError::NoTimestamps);
        }
        if nodes.is_empty() {
            return Err(TraceError::Validation("node list is empty".into()));
        }
        if demands.len() != timestamps.len() {
            return Err(TraceError::Validation(format!(
                "{} demand maps for {} timestamps",
                demands.len(),
                timestamps.len()
            )));
        }
        for (i, name) in nodes.iter().enumerate() {
            if nodes[..i].contains(name) {
                return Err(TraceError::Validation(format!("duplicate node `{name}`")));
            }
        }
        if timestamps.len() > 1 {
            let step = timestamps[1] - timestamps[0];
            if step <= 0 {
                return Err(TraceError::Validation(
                    "timestamps must be strictly increasing".into(),
                ));
            }
            for (i, pair) in timestamps.windows(2).enumerate() {
                if pair[1] - pair[0] != step {
                    return Err(TraceError::Validation(format!(
                        "non-uniform timestamp spacing: {} -> {} (index {}) differs from {step} min",
                        pair[0],
                        pair[1],
                        i + 1
                    )));
                }
            }
        }
        for (t, map) in demands.iter().enumerate() {
            for (&(src, dst), &gbps) in map {
                if src >= nodes.len() || dst >= nodes.len() {
                    return Err(TraceError::Validation(format!(
                        "demand ({src}, {dst}) at index {t} references an unknown node"
                    )));
                }
                if src == dst {
                    return Err(TraceError::Validation(format!(
                        "self demand at node `{}` (index {t})",
                        nodes[src]
                    )));
                }
                if !(gbps >= 0.0 && gbps.is_finite()) {
                    return Err(TraceError::Validation(format!(
                        "bit-rate {gbps} for {} -> {} at index {t} is not a non-negative number",
                        nodes[src], nodes[dst]
                    )));
                }
            }
        }
        Ok(Self {
            nodes,
            timestamps,
            demands,
        })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Sampling interval τ in minutes, `None` for a single-snapshot series.
    pub fn interval_minutes(&self) -> Option<i64> {
        (self.timestamps.len() > 1).then(|| self.timestamps[1] - self.timestamps[0])
    }

    pub fn demands_at(&self, index: usize) -> &BTreeMap<(usize, usize), f64> {
        &self.demands[index]
    }

    pub fn demand(&self, index: usize, src: &str, dst: &str) -> Option<f64> {
        let s = self.node_index(src)?;
        let d = self.node_index(dst)?;
        Some(self.demands[index].get(&(s, d)).copied().unwrap_or(0.0))
    }

    /// Serializes to the CSV interchange format, rows sorted by timestamp
    /// then (src, dst) node order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("timestamp,src,dst,gbps\n");
        for (t, map) in self.timestamps.iter().zip(&self.demands) {
            for (&(s, d), gbps) in map {
                let _ = writeln!(out, "{t},{},{},{gbps}", self.nodes[s], self.nodes[d]);
            }
        }
        out
    }
}

/// Per-node aggregated bit-rate series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrafficSeries {
    pub node_id: String,
    pub values: Vec<f64>,
}

pub fn parse_demand_matrices(
    raw_text: &str,
    format: DemandFormat,
) -> Result<DemandMatrixSeries, TraceError> {
    match format {
        DemandFormat::Csv => parse_csv(raw_text),
        DemandFormat::SndlibNative => parse_sndlib(raw_text),
    }
}

pub fn aggregate_node_traffic(
    series: &DemandMatrixSeries,
    node: &str,
    direction: Direction,
) -> Result<NodeTrafficSeries, TraceError> {
    let k = series
        .node_index(node)
        .ok_or_else(|| TraceError::UnknownNode(node.to_string()))?;
    let values = series
        .demands
        .iter()
        .map(|map| {
            map.iter()
                .filter(|(&(s, d), _)| match direction {
                    Direction::Incoming => d == k,
                    Direction::Outgoing => s == k,
                })
                .map(|(_, &v)| v)
                .sum()
        })
        .collect();
    Ok(NodeTrafficSeries {
        node_id: node.to_string(),
        values,
    })
}

fn parse_csv(raw_text: &str) -> Result<DemandMatrixSeries, TraceError> {
    let mut lines = raw_text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let Some((header_line, header)) = lines.next() else {
        return Err(TraceError::NoTimestamps);
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns != ["timestamp", "src", "dst", "gbps"] {
        return Err(TraceError::Parse {
            line: header_line,
            message: format!("expected header `timestamp,src,dst,gbps`, found `{header}`"),
        });
    }

    let mut rows: Vec<(i64, String, String, f64)> = Vec::new();
    for (line, text) in lines {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let err = |message: String| TraceError::Parse { line, message };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let t: i64 = fields[0]
            .parse()
            .map_err(|_| err(format!("invalid timestamp `{}`", fields[0])))?;
        let gbps: f64 = fields[3]
            .parse()
            .map_err(|_| err(format!("invalid bit-rate `{}`", fields[3])))?;
        if fields[1].is_empty() || fields[2].is_empty() {
            return Err(err("empty node identifier".into()));
        }
        if fields[1] == fields[2] {
            return Err(err(format!("self demand at node `{}`", fields[1])));
        }
        if !(gbps >= 0.0 && gbps.is_finite()) {
            return Err(err(format!("bit-rate {gbps} is not a non-negative number")));
        }
        if let Some(prev) = rows.last() {
            if t < prev.0 {
                return Err(err(format!(
                    "timestamp {t} is out of order (after {})",
                    prev.0
                )));
            }
        }
        rows.push((t, fields[1].to_string(), fields[2].to_string(), gbps));
    }
    if rows.is_empty() {
        return Err(TraceError::NoTimestamps);
    }

    let mut nodes: Vec<String> = rows
        .iter()
        .flat_map(|(_, s, d, _)| [s.clone(), d.clone()])
        .collect();
    nodes.sort();
    nodes.dedup();
    let index = |name: &str| nodes.binary_search_by(|n| n.as_str().cmp(name)).unwrap();

    let mut timestamps = Vec::new();
    let mut demands: Vec<BTreeMap<(usize, usize), f64>> = Vec::new();
    for (t, s, d, gbps) in &rows {
        if timestamps.last() != Some(t) {
            timestamps.push(*t);
            demands.push(BTreeMap::new());
        }
        let map = demands.last_mut().unwrap();
        if map.insert((index(s), index(d)), *gbps).is_some() {
            return Err(TraceError::Validation(format!(
                "duplicate demand {s} -> {d} at timestamp {t}"
            )));
        }
    }
    DemandMatrixSeries::new(nodes, timestamps, demands)
}

struct NativeDocument {
    first_line: usize,
    time: Option<i64>,
    granularity: Option<i64>,
    unit_scale: f64,
    nodes: Vec<String>,
    demands: Vec<(String, String, f64)>,
}

fn parse_sndlib(raw_text: &str) -> Result<DemandMatrixSeries, TraceError> {
    let mut documents: Vec<NativeDocument> = Vec::new();
    let mut section: Option<String> = None;

    for (i, raw) in raw_text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| TraceError::Parse { line, message };
        if raw.trim_start().starts_with("?SNDlib") {
            if section.is_some() {
                return Err(err("new document starts inside an open section".into()));
            }
            documents.push(NativeDocument {
                first_line: line,
                time: None,
                granularity: None,
                unit_scale: 1.0,
                nodes: Vec::new(),
                demands: Vec::new(),
            });
            continue;
        }
        let text = raw.split('#').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let doc = match documents.last_mut() {
            Some(doc) => doc,
            None => {
                // Tolerate a missing `?SNDlib` banner on a single document.
                documents.push(NativeDocument {
                    first_line: line,
                    time: None,
                    granularity: None,
                    unit_scale: 1.0,
                    nodes: Vec::new(),
                    demands: Vec::new(),
                });
                documents.last_mut().unwrap()
            }
        };

        match section.as_deref() {
            None => {
                let mut tokens = text.split_whitespace();
                let name = tokens.next().unwrap_or_default();
                if tokens.next() != Some("(") || tokens.next().is_some() {
                    return Err(err(format!("expected a section opener, found `{text}`")));
                }
                section = Some(name.to_string());
            }
            Some(_) if text == ")" => section = None,
            Some("META") => {
                let Some((key, value)) = text.split_once('=') else {
                    return Err(err(format!("expected `key = value`, found `{text}`")));
                };
                let value = value.trim();
                match key.trim() {
                    "time" => doc.time = Some(parse_native_time(value).map_err(err)?),
                    "granularity" => doc.granularity = Some(parse_granularity(value).map_err(err)?),
                    "unit" => doc.unit_scale = unit_scale(value).map_err(err)?,
                    _ => {}
                }
            }
            Some("NODES") => {
                let name = text.split_whitespace().next().unwrap_or_default();
                doc.nodes.push(name.to_string());
            }
            Some("DEMANDS") => {
                // <id> ( <source> <target> ) <routing_unit> <value> <max_path_length>
                let tokens: Vec<&str> = text.split_whitespace().collect();
                if tokens.len() < 7 || tokens[1] != "(" || tokens[4] != ")" {
                    return Err(err(format!("malformed demand record `{text}`")));
                }
                let value: f64 = tokens[6]
                    .parse()
                    .map_err(|_| err(format!("malformed demand value in `{text}`")))?;
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(err(format!(
                        "demand value {value} is not a non-negative number"
                    )));
                }
                if tokens[2] != tokens[3] {
                    doc.demands.push((
                        tokens[2].to_string(),
                        tokens[3].to_string(),
                        value * doc.unit_scale,
                    ));
                }
            }
            Some(_) => {}
        }
    }
    if let Some(open) = section {
        return Err(TraceError::Parse {
            line: raw_text.lines().count(),
            message: format!("section `{open}` is not closed"),
        });
    }
    if documents.is_empty() {
        return Err(TraceError::NoTimestamps);
    }

    let mut nodes = documents[0].nodes.clone();
    if nodes.is_empty() {
        let mut seen: Vec<String> = documents
            .iter()
            .flat_map(|d| {
                d.demands
                    .iter()
                    .flat_map(|(s, t, _)| [s.clone(), t.clone()])
            })
            .collect();
        seen.sort();
        seen.dedup();
        nodes = seen;
    }

    let mut timestamps = Vec::with_capacity(documents.len());
    let mut demands = Vec::with_capacity(documents.len());
    for (idx, doc) in documents.iter().enumerate() {
        let err = |message: String| TraceError::Parse {
            line: doc.first_line,
            message,
        };
        if !doc.nodes.is_empty() && doc.nodes != nodes {
            return Err(err("node list differs from the first document".into()));
        }
        let t = match (doc.time, doc.granularity) {
            (Some(t), _) => t,
            (None, Some(g)) => idx as i64 * g,
            (None, None) => {
                return Err(err("document has neither `time` nor `granularity`".into()))
            }
        };
        let mut map = BTreeMap::new();
        for (s, d, v) in &doc.demands {
            let si = nodes
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| err(format!("demand references unknown node `{s}`")))?;
            let di = nodes
                .iter()
                .position(|n| n == d)
                .ok_or_else(|| err(format!("demand references unknown node `{d}`")))?;
            *map.entry((si, di)).or_insert(0.0) += v;
        }
        timestamps.push(t);
        demands.push(map);
    }
    DemandMatrixSeries::new(nodes, timestamps, demands)
}

fn parse_native_time(value: &str) -> Result<i64, String> {
    let parsed = NaiveDateTime::parse_from_str(value, "%Y%m%d-%H%M")
        .map_err(|e| format!("invalid time `{value}`: {e}"))?;
    Ok(parsed.and_utc().timestamp() / 60)
}

fn parse_granularity(value: &str) -> Result<i64, String> {
    let digits: String = value.chars().take_while(char::is_ascii_digit).collect();
    let n: i64 = digits
        .parse()
        .map_err(|_| format!("invalid granularity `{value}`"))?;
    match &value[digits.len()..] {
        "min" => Ok(n),
        "h" | "hour" => Ok(n * 60),
        "day" | "d" => Ok(n * 1440),
        other => Err(format!("unsupported granularity unit `{other}`")),
    }
}

fn unit_scale(value: &str) -> Result<f64, String> {
    match value.to_ascii_uppercase().as_str() {
        "GBITPERSEC" => Ok(1.0),
        "MBITPERSEC" => Ok(1e-3),
        "KBITPERSEC" => Ok(1e-6),
        other => Err(format!("unsupported unit `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "timestamp,src,dst,gbps\n0,A,B,1.0\n0,C,B,2.0\n5,A,B,3.0\n5,C,B,4.0\n";

    #[test]
    fn csv_echoes_entries() {
        let s = parse_demand_matrices(CSV, DemandFormat::Csv).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.interval_minutes(), Some(5));
        assert_eq!(s.demand(0, "A", "B"), Some(1.0));
        assert_eq!(s.demand(0, "C", "B"), Some(2.0));
        assert_eq!(s.demand(1, "A", "B"), Some(3.0));
        assert_eq!(s.demand(1, "C", "B"), Some(4.0));
        assert_eq!(s.demand(1, "B", "A"), Some(0.0));
        let again = parse_demand_matrices(&s.to_csv(), DemandFormat::Csv).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn empty_body_has_no_timestamps() {
        let e = parse_demand_matrices("timestamp,src,dst,gbps\n", DemandFormat::Csv).unwrap_err();
        assert_eq!(e.to_string(), "no timestamps");
        let e = parse_demand_matrices("", DemandFormat::SndlibNative).unwrap_err();
        assert!(matches!(e, TraceError::NoTimestamps));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = "timestamp,src,dst,gbps\n0,A,B,1.0\n0,A,C,oops\n";
        match parse_demand_matrices(text, DemandFormat::Csv).unwrap_err() {
            TraceError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn non_uniform_spacing_rejected() {
        let text = "timestamp,src,dst,gbps\n0,A,B,1\n5,A,B,1\n15,A,B,1\n";
        let e = parse_demand_matrices(text, DemandFormat::Csv).unwrap_err();
        assert!(matches!(e, TraceError::Validation(_)), "{e}");
    }

    #[test]
    fn aggregate_incoming_and_outgoing() {
        let text = "timestamp,src,dst,gbps\n0,A,B,2\n0,C,B,3\n0,B,A,7\n";
        let s = parse_demand_matrices(text, DemandFormat::Csv).unwrap();
        let b_in = aggregate_node_traffic(&s, "B", Direction::Incoming).unwrap();
        assert_eq!(b_in.values, vec![5.0]);
        let b_out = aggregate_node_traffic(&s, "B", Direction::Outgoing).unwrap();
        assert_eq!(b_out.values, vec![7.0]);
        let c_in = aggregate_node_traffic(&s, "C", Direction::Incoming).unwrap();
        assert_eq!(c_in.values, vec![0.0]);
        assert!(matches!(
            aggregate_node_traffic(&s, "Z", Direction::Incoming),
            Err(TraceError::UnknownNode(_))
        ));
    }

    #[test]
    fn aggregate_matches_brute_force_table() {
        // 3 nodes, 2 timestamps, every ordered pair populated.
        let nodes = ["N", "P", "R"];
        let rate = |t: usize, s: usize, d: usize| (1 + t * 9 + s * 3 + d) as f64 * 0.5;
        let mut text = String::from("timestamp,src,dst,gbps\n");
        for t in 0..2 {
            for s in 0..3 {
                for d in 0..3 {
                    if s != d {
                        text += &format!("{},{},{},{}\n", t * 5, nodes[s], nodes[d], rate(t, s, d));
                    }
                }
            }
        }
        let series = parse_demand_matrices(&text, DemandFormat::Csv).unwrap();
        for (k, name) in nodes.iter().enumerate() {
            let got = aggregate_node_traffic(&series, name, Direction::Incoming).unwrap();
            for t in 0..2 {
                let mut expected = 0.0;
                for s in 0..3 {
                    if s != k {
                        expected += rate(t, s, k);
                    }
                }
                assert_eq!(got.values[t], expected);
            }
        }
    }

    #[test]
    fn sndlib_native_documents() {
        let doc = |time: &str, v: f64| {
            format!(
                "?SNDlib native format; type: network; version: 1.0\n\
                 # network demandMatrix\n\
                 META (\n  granularity = 5min\n  time = {time}\n  unit = MBITPERSEC\n)\n\
                 NODES (\n  ATLA ( -84.38 33.75 )\n  CHIN ( -87.62 41.83 )\n  DNVR ( -105.0 40.75 )\n)\n\
                 DEMANDS (\n  ATLA_CHIN ( ATLA CHIN ) 1 {v} UNLIMITED\n  DNVR_CHIN ( DNVR CHIN ) 1 250.0 UNLIMITED\n  ATLA_ATLA ( ATLA ATLA ) 1 9.0 UNLIMITED\n)\n"
            )
        };
        let text = doc("20040301-0000", 1000.0) + &doc("20040301-0005", 500.0);
        let s = parse_demand_matrices(&text, DemandFormat::SndlibNative).unwrap();
        assert_eq!(s.node_count(), 3);
        assert_eq!(s.interval_minutes(), Some(5));
        assert_eq!(s.demand(0, "ATLA", "CHIN"), Some(1.0));
        assert_eq!(s.demand(1, "ATLA", "CHIN"), Some(0.5));
        let chin = aggregate_node_traffic(&s, "CHIN", Direction::Incoming).unwrap();
        assert_eq!(chin.values, vec![1.25, 0.75]);
    }

    #[test]
    fn sndlib_malformed_demand_line() {
        let text = "?SNDlib native format\nMETA (\n time = 20040301-0000\n)\nDEMANDS (\n A_B ( A B 1 2 UNLIMITED\n)\n";
        match parse_demand_matrices(text, DemandFormat::SndlibNative).unwrap_err() {
            TraceError::Parse { line, .. } => assert_eq!(line, 6),
            other => panic!("unexpected {other}"),
        }
    }
}
