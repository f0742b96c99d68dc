//! Run manifests: everything needed to reproduce a command's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use hetgfl::model::ModelConfig;
use hetgfl::train::TrainConfig;
use hetgfl::Result;

/// Seeds derived from the one `--seed` flag.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivedSeeds {
    pub split: u64,
    pub init: u64,
    pub kmeans: u64,
}

impl DerivedSeeds {
    pub fn from(seed: u64) -> Self {
        Self {
            split: seed + 1,
            init: seed + 2,
            kmeans: seed + 3,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub dataset_dir: String,
    /// sha-256 over the dataset files (sorted names, then contents).
    pub dataset_fingerprint: String,
    pub seed: u64,
    pub derived_seeds: DerivedSeeds,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_config: Option<ModelConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmeans: Option<KMeansManifest>,
    pub artifacts: BTreeMap<String, String>,
    pub metrics: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct KMeansManifest {
    pub k: usize,
    pub seed: u64,
    pub representation: String,
}

const DATASET_FILES: [&str; 4] = ["node.tsv", "edge.tsv", "label.tsv", "split.tsv"];

/// Content hash of the dataset directory.
pub fn fingerprint(dir: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in DATASET_FILES {
        let path = dir.join(name);
        if path.is_file() {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(fs::read(&path)?);
        }
    }
    let digest = hasher.finalize();
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
