use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::eon::{Topology, ABILENE_NODES};
use crate::lstm::{ModelShape, TrainConfig};
use crate::qffl::{round_seed, QConfig};
use crate::trace::{DemandFormat, Direction, NoiseDistribution, NoiseSpec, SyntheticSpec};

/// Where the demand matrices come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceSource {
    Synthetic { spec: SyntheticSpec },
    File { path: PathBuf, format: DemandFormat },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed; [`ExperimentConfig::reseed`] derives every other seed from it.
    pub seed: u64,
    pub source: TraceSource,
    /// Topology file; the bundled Abilene network when absent.
    pub topology: Option<PathBuf>,
    /// Node owned by each client, in client order.
    pub clients: Vec<String>,
    /// Patterns n_k per client.
    pub sizes: Vec<usize>,
    pub noise: Vec<NoiseSpec>,
    pub direction: Direction,
    /// Window length κ.
    pub window: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub q_list: Vec<f64>,
    pub rounds: usize,
    /// Step constant L; 1 / learning_rate when absent.
    pub lipschitz: Option<f64>,
    /// Seed for drawing the RSA destination of every client.
    pub rsa_seed: u64,
    /// Write a checkpoint every this many rounds; 0 keeps only the final one.
    pub checkpoint_every: usize,
    /// Not part of the configuration hash.
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

/// A failed configuration rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(format!("unknown preset `{other}` (expected paper or desk)")),
        }
    }
}

/// Largest seed a TOML configuration can hold.
pub const MAX_SEED: u64 = i64::MAX as u64;

/// Derives a named sub-seed from the master seed, below [`MAX_SEED`].
pub fn derive_seed(master: u64, label: &str) -> u64 {
    round_seed(master, 0, label) & MAX_SEED
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => Self::paper(),
            Preset::Desk => Self::desk(),
        }
    }

    /// Five clients of 3000/2000/8000/5000/7500 patterns, κ = 70, a
    /// 64-64 LSTM, batch 256, learning rate 1e-4, 100 rounds and
    /// q ∈ {0, 2, 4, 6, 8, 10}, on synthetic Abilene traces.
    pub fn paper() -> Self {
        use NoiseDistribution::*;
        let sizes = vec![3000, 2000, 8000, 5000, 7500];
        let window = 70;
        let steps = sizes.iter().max().unwrap() + window + 2;
        let mut config = Self {
            seed: 2024,
            source: TraceSource::Synthetic {
                spec: SyntheticSpec::abilene_default(steps, 0),
            },
            topology: Option::None,
            clients: ABILENE_NODES[..5].iter().map(|s| s.to_string()).collect(),
            sizes,
            noise: [
                Gaussian {
                    mean: 10.0,
                    std: 2.0,
                },
                LogNormal {
                    mu: 1.0,
                    sigma: 0.5,
                },
                Exponential { rate: 2.0 },
                Gamma {
                    shape: 1.0,
                    scale: 3.0,
                },
                None,
            ]
            .into_iter()
            .map(|d| NoiseSpec::new(d, 0))
            .collect(),
            direction: Direction::Incoming,
            window,
            hidden: vec![64, 64],
            train: TrainConfig {
                learning_rate: 1e-4,
                batch_size: 256,
                local_epochs: 1,
                seed: 0,
                clip_norm: Some(5.0),
            },
            q_list: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            rounds: 100,
            lipschitz: Option::None,
            rsa_seed: 0,
            checkpoint_every: 10,
            out_dir: PathBuf::from("runs/paper"),
        };
        config.reseed(config.seed);
        config
    }

    /// Four heterogeneous clients, short series, an 8-8 LSTM and 20 rounds
    /// over q ∈ {0, 5, 10}; the whole pipeline runs in seconds.
    pub fn desk() -> Self {
        use NoiseDistribution::*;
        let sizes = vec![700, 400, 1000, 550];
        let window = 16;
        let steps = sizes.iter().max().unwrap() + window + 2;
        let mut spec = SyntheticSpec::abilene_default(steps, 0);
        // Distinct, clearly separated signal-to-noise ratios per client.
        for (profile, jitter) in spec.profiles.iter_mut().zip([0.01, 0.04, 0.02, 0.08]) {
            profile.period_minutes = 240.0;
            profile.noise_std = profile.base * jitter;
        }
        let mut config = Self {
            seed: 7,
            source: TraceSource::Synthetic { spec },
            topology: Option::None,
            clients: ABILENE_NODES[..4].iter().map(|s| s.to_string()).collect(),
            sizes,
            noise: [
                Gaussian {
                    mean: 4.0,
                    std: 1.0,
                },
                LogNormal {
                    mu: 1.0,
                    sigma: 0.8,
                },
                Exponential { rate: 0.5 },
                Gamma {
                    shape: 2.0,
                    scale: 3.0,
                },
            ]
            .into_iter()
            .map(|d| NoiseSpec::new(d, 0))
            .collect(),
            direction: Direction::Incoming,
            window,
            hidden: vec![8, 8],
            train: TrainConfig {
                learning_rate: 0.05,
                batch_size: 32,
                local_epochs: 1,
                seed: 0,
                clip_norm: Some(5.0),
            },
            q_list: vec![0.0, 5.0, 10.0],
            rounds: 20,
            lipschitz: Some(0.2),
            rsa_seed: 0,
            checkpoint_every: 0,
            out_dir: PathBuf::from("runs/desk"),
        };
        config.reseed(config.seed);
        config
    }

    /// Sets the master seed and re-derives the trace, noise, training and
    /// RSA seeds from it.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        if let TraceSource::Synthetic { spec } = &mut self.source {
            spec.seed = derive_seed(seed, "synthetic");
        }
        for (noise, client) in self.noise.iter_mut().zip(&self.clients) {
            noise.seed = derive_seed(seed, &format!("noise/{client}"));
        }
        self.train.seed = derive_seed(seed, "train");
        self.rsa_seed = derive_seed(seed, "rsa");
    }

    /// Parses TOML, taking unspecified fields (at any depth) from `base`.
    pub fn from_toml_over(text: &str, base: &ExperimentConfig) -> Result<Self, ExperimentError> {
        let overlay: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))?;
        let mut merged =
            toml::Table::try_from(base).map_err(|e| ExperimentError::Config(e.to_string()))?;
        merge(&mut merged, overlay);
        merged
            .try_into()
            .map_err(|e: toml::de::Error| ExperimentError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        Self::from_toml_over(text, &Self::default())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// SHA-256 of the canonical JSON form, ignoring `out_dir`.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        let json = serde_json::to_vec(&canonical).expect("configuration serializes to JSON");
        hex(&Sha256::digest(json))
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape::new(self.hidden.clone())
    }

    pub fn q_config(&self, q: f64) -> QConfig {
        QConfig {
            q,
            rounds: self.rounds,
            lipschitz: self.lipschitz,
            train: self.train.clone(),
            early_stop_patience: None,
        }
    }

    pub fn load_topology(&self) -> Result<Topology, ExperimentError> {
        match &self.topology {
            None => Ok(Topology::abilene()),
            Some(path) => {
                let text = read(path)?;
                Ok(Topology::parse(&text)?)
            }
        }
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn read(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Every rule `config` breaks; empty when it is runnable.
pub fn validate_config(config: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |field: &str, rule: String| {
        out.push(Violation {
            field: field.to_string(),
            rule,
        })
    };
    let m = config.clients.len();

    if config.q_list.is_empty() {
        fail("q_list", "must list at least one q".into());
    }
    for q in &config.q_list {
        if !(*q >= 0.0 && q.is_finite()) {
            fail(
                "q_list",
                format!("every q must be finite and >= 0, got {q}"),
            );
        }
    }
    if config.window == 0 {
        fail("window", "κ must be at least 1".into());
    }
    if m < 2 {
        fail("clients", format!("need at least two clients, got {m}"));
    }
    for (i, c) in config.clients.iter().enumerate() {
        if config.clients[..i].contains(c) {
            fail("clients", format!("`{c}` is listed twice"));
        }
    }
    if config.sizes.len() != m {
        fail(
            "sizes",
            format!("{} sizes for {m} clients", config.sizes.len()),
        );
    }
    for (c, &n) in config.clients.iter().zip(&config.sizes) {
        if n <= crate::trace::TEST_PATTERNS + 1 {
            fail(
                "sizes",
                format!(
                    "client `{c}` needs more than {} patterns, got {n}",
                    crate::trace::TEST_PATTERNS + 1
                ),
            );
        }
    }
    if config.noise.len() != m {
        fail(
            "noise",
            format!("{} noise specs for {m} clients", config.noise.len()),
        );
    }
    for (c, n) in config.clients.iter().zip(&config.noise) {
        if let Err(e) = n.validate() {
            fail("noise", format!("client `{c}`: {e}"));
        }
    }
    if config.hidden.is_empty() || config.hidden.contains(&0) {
        fail("hidden", "needs at least one layer, all widths >= 1".into());
    }
    let t = &config.train;
    if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
        fail(
            "train.learning_rate",
            format!("must be positive, got {}", t.learning_rate),
        );
    }
    if t.batch_size == 0 {
        fail("train.batch_size", "must be at least 1".into());
    }
    if t.local_epochs == 0 {
        fail("train.local_epochs", "must be at least 1".into());
    }
    if let Some(c) = t.clip_norm {
        if !(c > 0.0) {
            fail("train.clip_norm", format!("must be positive, got {c}"));
        }
    }
    if config.rounds == 0 {
        fail("rounds", "must be at least 1".into());
    }
    if let Some(l) = config.lipschitz {
        if !(l > 0.0 && l.is_finite()) {
            fail("lipschitz", format!("must be positive, got {l}"));
        }
    }

    let mut seeds = vec![
        ("seed", config.seed),
        ("train.seed", config.train.seed),
        ("rsa_seed", config.rsa_seed),
    ];
    seeds.extend(config.noise.iter().map(|n| ("noise.seed", n.seed)));
    if let TraceSource::Synthetic { spec } = &config.source {
        seeds.push(("source.spec.seed", spec.seed));
    }
    for (field, seed) in seeds {
        if seed > MAX_SEED {
            fail(field, format!("must be at most {MAX_SEED}, got {seed}"));
        }
    }

    match &config.source {
        TraceSource::Synthetic { spec } => {
            if let Err(e) = spec.validate() {
                fail("source.spec", e.to_string());
            }
            for c in &config.clients {
                if !spec.nodes.contains(c) {
                    fail(
                        "clients",
                        format!("`{c}` is not a node of the synthetic spec"),
                    );
                }
            }
            let need = config.sizes.iter().max().copied().unwrap_or(0) + config.window + 1;
            if spec.steps < need {
                fail(
                    "source.spec.steps",
                    format!("need at least {need} steps, got {}", spec.steps),
                );
            }
        }
        TraceSource::File { path, .. } => {
            if std::fs::File::open(path).is_err() {
                fail(
                    "source.path",
                    format!("`{}` is not readable", path.display()),
                );
            }
        }
    }

    match config.load_topology() {
        Ok(topology) => {
            for c in &config.clients {
                if topology.node_index(c).is_err() {
                    fail("clients", format!("`{c}` is not a topology node"));
                }
            }
        }
        Err(e) => fail("topology", e.to_string()),
    }
    out
}
