//! Self-describing model checkpoints.
//!
//! A checkpoint is a single JSON document holding the model config, the
//! graph signature, and every parameter tensor with its shape. Values
//! round-trip bit-exactly (shortest-representation float formatting).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::params::{GraphMeta, ModelParams};

const FORMAT: &str = "hetgfl-checkpoint-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub meta: GraphMeta,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn new(config: ModelConfig, params: ModelParams) -> Self {
        Self {
            format: FORMAT.into(),
            meta: params.meta.clone(),
            config,
            params,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile {
                path: path.to_path_buf(),
            });
        }
        let text = fs::read_to_string(path)?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.format != FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported format `{}`, expected `{FORMAT}`",
                ckpt.format
            )));
        }
        ckpt.validate()?;
        Ok(ckpt)
    }

    /// Cross-checks stored tensors against the config they claim to follow.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.params.layers.len() != self.config.n_layers {
            return Err(Error::Checkpoint(format!(
                "stored {} layers, config says {}",
                self.params.layers.len(),
                self.config.n_layers
            )));
        }
        for t in self.params.tensors() {
            if t.shape.iter().product::<usize>() != t.values.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}`: shape {:?} does not match {} values",
                    t.name,
                    t.shape,
                    t.values.len()
                )));
            }
        }
        let expected = ModelParams::init(&self.meta, &self.config)?;
        for (have, want) in self.params.tensors().iter().zip(expected.tensors()) {
            if have.shape != want.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor `{}`: shape {:?}, expected {:?}",
                    have.name, have.shape, want.shape
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::synth_planted;
    use crate::params::GraphMeta;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = synth_planted(30, 2, 3, 2, 0.9, 7).unwrap();
        let cfg = ModelConfig {
            edge_dim: 4,
            ..ModelConfig::uniform(2, 6)
        };
        let params = ModelParams::init(&GraphMeta::of(&g), &cfg).unwrap();
        let ckpt = Checkpoint::new(cfg, params);
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.json");
        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        for (a, b) in ckpt.params.tensors().iter().zip(loaded.params.tensors()) {
            assert_eq!(a.values, b.values, "tensor {}", a.name);
        }
        assert_eq!(ckpt.config, loaded.config);
    }

    #[test]
    fn corrupted_checkpoint_fails_to_load() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("model.json");
        std::fs::write(&path, "{\"format\": \"hetgfl-checkpoint-v1\", \"junk\": 1").unwrap();
        assert!(Checkpoint::load(&path).is_err());
    }

    #[test]
    fn shape_drift_is_detected() {
        let g = synth_planted(30, 2, 3, 2, 0.9, 7).unwrap();
        let cfg = ModelConfig {
            edge_dim: 4,
            ..ModelConfig::uniform(1, 6)
        };
        let params = ModelParams::init(&GraphMeta::of(&g), &cfg).unwrap();
        let mut ckpt = Checkpoint::new(cfg, params);
        ckpt.params.classifier.shape = vec![6, 5];
        ckpt.params.classifier.values = vec![0.0; 30];
        assert!(ckpt.validate().is_err());
    }
}
