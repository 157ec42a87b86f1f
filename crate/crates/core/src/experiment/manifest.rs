use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{hex, read};
use super::{ExperimentConfig, ExperimentError, Stage, TraceSource};

pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT: &str = "fairfed-manifest";
const VERSION: u32 = 1;

/// Everything needed to rerun an experiment and check its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub package_version: String,
    pub stage: Stage,
    pub config_sha256: String,
    /// Every seed in effect, by name.
    pub seeds: BTreeMap<String, u64>,
    /// SHA-256 of each output file, keyed by path relative to the output
    /// directory.
    pub outputs: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(config: &ExperimentConfig, stage: Stage) -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert("master".to_string(), config.seed);
        if let TraceSource::Synthetic { spec } = &config.source {
            seeds.insert("synthetic".to_string(), spec.seed);
        }
        for (client, noise) in config.clients.iter().zip(&config.noise) {
            seeds.insert(format!("noise/{client}"), noise.seed);
        }
        seeds.insert("train".to_string(), config.train.seed);
        seeds.insert("rsa".to_string(), config.rsa_seed);
        Self {
            format: FORMAT.to_string(),
            version: VERSION,
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            stage,
            config_sha256: config.hash(),
            seeds,
            outputs: BTreeMap::new(),
            config: config.clone(),
        }
    }

    /// Hashes every file under `dir` and writes `dir/manifest.json`.
    pub fn record(
        config: &ExperimentConfig,
        stage: Stage,
        dir: &Path,
    ) -> Result<Self, ExperimentError> {
        let mut manifest = Self::new(config, stage);
        hash_tree(dir, dir, &mut manifest.outputs)?;
        manifest.outputs.remove(MANIFEST_FILE);
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| ExperimentError::Manifest(e.to_string()))?;
        std::fs::write(&path, text + "\n")
            .map_err(|source| ExperimentError::Io { path, source })?;
        Ok(manifest)
    }

    /// Reads a manifest and checks its configuration hash.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let manifest: Manifest = serde_json::from_str(&read(path)?)
            .map_err(|e| ExperimentError::Manifest(e.to_string()))?;
        if manifest.format != FORMAT || manifest.version != VERSION {
            return Err(ExperimentError::Manifest(format!(
                "unsupported manifest {} v{}",
                manifest.format, manifest.version
            )));
        }
        if manifest.config.hash() != manifest.config_sha256 {
            return Err(ExperimentError::Manifest(
                "configuration does not match its recorded hash".into(),
            ));
        }
        Ok(manifest)
    }
}

fn hash_tree(
    root: &Path,
    dir: &Path,
    out: &mut BTreeMap<String, String>,
) -> Result<(), ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<_, _>>()
        .map_err(io)?;
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            hash_tree(root, &path, out)?;
        } else {
            let bytes = std::fs::read(&path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            let rel = path.strip_prefix(root).expect("walk stays under root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.insert(key, hex(&Sha256::digest(&bytes)));
        }
    }
    Ok(())
}
