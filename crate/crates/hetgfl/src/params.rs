//! Trainable parameter storage, initialization, and tape binding.
//!
//! Parameters live outside the tape as plain buffers. Each forward pass
//! registers them as leaves on a fresh [`Tape`]; gradients are read back
//! through the returned [`BoundModel`], whose flat id order matches
//! [`ModelParams::tensors`] one-to-one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, TensorId};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::model::{AggMode, ModelConfig};

/// Named dense parameter buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    /// Frozen tensors stay on the tape but receive no updates and no
    /// weight decay.
    pub trainable: bool,
}

impl ParamTensor {
    fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>, trainable: bool) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Self {
            name: name.into(),
            shape,
            values,
            trainable,
        }
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// How the edge-type embedding table is initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeInit {
    /// One trainable row per edge type.
    Typed,
    /// The edge-information ablation: a single random encoding shared by
    /// every type, excluded from the trainable set. Type identity carries
    /// no information downstream.
    RandomFrozen,
}

/// Embedding dictionary over edge types: row `t` encodes type id `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeTypeTable {
    pub n_types: usize,
    pub dim: usize,
    pub weights: ParamTensor,
}

/// Builds the edge-type table from the scaled-uniform distribution.
///
/// `RandomFrozen` draws one random encoding and assigns it to every type:
/// distinct frozen rows per type would still let the shared relation map
/// recover type identity, which is exactly what this ablation removes.
pub fn edge_type_init(n_edge_types: usize, edge_dim: usize, seed: u64, mode: EdgeInit) -> EdgeTypeTable {
    assert!(edge_dim >= 1, "edge embedding dim must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = match mode {
        EdgeInit::Typed => glorot(&mut rng, n_edge_types, edge_dim, n_edge_types * edge_dim),
        EdgeInit::RandomFrozen => {
            let row = glorot(&mut rng, n_edge_types, edge_dim, edge_dim);
            row.iter().cycle().take(n_edge_types * edge_dim).copied().collect()
        }
    };
    EdgeTypeTable {
        n_types: n_edge_types,
        dim: edge_dim,
        weights: ParamTensor::new(
            "edge_table",
            vec![n_edge_types, edge_dim],
            values,
            mode == EdgeInit::Typed,
        ),
    }
}

impl EdgeTypeTable {
    /// Dictionary lookup: type ids index rows directly.
    pub fn row_index(&self, etype: usize) -> Result<usize> {
        if etype < self.n_types {
            Ok(etype)
        } else {
            Err(Error::UnknownEdgeType {
                etype,
                table_len: self.n_types,
            })
        }
    }

    pub fn row(&self, etype: usize) -> Result<&[f64]> {
        let r = self.row_index(etype)?;
        Ok(&self.weights.values[r * self.dim..(r + 1) * self.dim])
    }
}

/// Per-node-type input projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProjection {
    pub w: ParamTensor,
    pub b: ParamTensor,
}

/// Trainable tensors of one propagation layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Maps edge embeddings into this layer's input space (`edge_dim x d_in`).
    pub w_rel: ParamTensor,
    /// Output projection (`d_in x d_out`).
    pub w: ParamTensor,
    /// Residual projection, present exactly when `d_in != d_out`.
    pub w_res: Option<ParamTensor>,
    /// Attention vector (`2*d_out + d_in`), absent in plain-sum mode.
    pub attn: Option<ParamTensor>,
}

/// Shape signature of the graph a parameter set was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub input_dims: Vec<usize>,
    pub n_edge_types: usize,
    pub n_classes: usize,
}

impl GraphMeta {
    pub fn of(graph: &HeteroGraph) -> Self {
        Self {
            input_dims: graph.features().iter().map(|f| f.dim).collect(),
            n_edge_types: graph.n_edge_types(),
            n_classes: graph.n_classes(),
        }
    }

    pub fn check_graph(&self, graph: &HeteroGraph) -> Result<()> {
        let other = Self::of(graph);
        if *self == other {
            return Ok(());
        }
        Err(Error::Checkpoint(format!(
            "graph shape differs from checkpoint: input dims {:?} vs {:?}, \
             edge types {} vs {}, classes {} vs {}",
            other.input_dims,
            self.input_dims,
            other.n_edge_types,
            self.n_edge_types,
            other.n_classes,
            self.n_classes
        )))
    }
}

/// All model parameters plus the graph signature they were built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub node_proj: Vec<NodeProjection>,
    pub edge_table: EdgeTypeTable,
    pub layers: Vec<LayerParams>,
    /// Classification head (`d_L x n_classes`).
    pub classifier: ParamTensor,
    pub meta: GraphMeta,
}

impl ModelParams {
    /// Fresh scaled-uniform initialization, deterministic in `config.seed`.
    pub fn init(meta: &GraphMeta, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let d0 = config.dims[0];

        let node_proj = meta
            .input_dims
            .iter()
            .enumerate()
            .map(|(t, &din)| NodeProjection {
                w: ParamTensor::new(
                    format!("proj{t}.w"),
                    vec![din, d0],
                    glorot(&mut rng, din, d0, din * d0),
                    true,
                ),
                b: ParamTensor::new(format!("proj{t}.b"), vec![1, d0], vec![0.0; d0], true),
            })
            .collect();

        let mode = if config.ablations.no_ei {
            EdgeInit::RandomFrozen
        } else {
            EdgeInit::Typed
        };
        let edge_table = edge_type_init(meta.n_edge_types, config.edge_dim, rng.gen(), mode);

        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let (d_in, d_out) = (config.dims[l], config.dims[l + 1]);
            let w_rel = ParamTensor::new(
                format!("layer{l}.w_rel"),
                vec![config.edge_dim, d_in],
                glorot(&mut rng, config.edge_dim, d_in, config.edge_dim * d_in),
                true,
            );
            let w = ParamTensor::new(
                format!("layer{l}.w"),
                vec![d_in, d_out],
                glorot(&mut rng, d_in, d_out, d_in * d_out),
                true,
            );
            let w_res = (d_in != d_out).then(|| {
                ParamTensor::new(
                    format!("layer{l}.w_res"),
                    vec![d_in, d_out],
                    glorot(&mut rng, d_in, d_out, d_in * d_out),
                    true,
                )
            });
            let attn = (config.agg != AggMode::PlainSum).then(|| {
                let len = 2 * d_out + d_in;
                ParamTensor::new(
                    format!("layer{l}.attn"),
                    vec![len, 1],
                    glorot(&mut rng, len, 1, len),
                    true,
                )
            });
            layers.push(LayerParams {
                w_rel,
                w,
                w_res,
                attn,
            });
        }

        let d_last = *config.dims.last().unwrap();
        let classifier = ParamTensor::new(
            "classifier",
            vec![d_last, meta.n_classes],
            glorot(&mut rng, d_last, meta.n_classes, d_last * meta.n_classes),
            true,
        );

        Ok(Self {
            node_proj,
            edge_table,
            layers,
            classifier,
            meta: meta.clone(),
        })
    }

    /// Every tensor, in the canonical flat order shared with [`BoundModel`].
    pub fn tensors(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        for p in &self.node_proj {
            out.push(&p.w);
            out.push(&p.b);
        }
        out.push(&self.edge_table.weights);
        for l in &self.layers {
            out.push(&l.w_rel);
            out.push(&l.w);
            if let Some(r) = &l.w_res {
                out.push(r);
            }
            if let Some(a) = &l.attn {
                out.push(a);
            }
        }
        out.push(&self.classifier);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        for p in &mut self.node_proj {
            out.push(&mut p.w);
            out.push(&mut p.b);
        }
        out.push(&mut self.edge_table.weights);
        for l in &mut self.layers {
            out.push(&mut l.w_rel);
            out.push(&mut l.w);
            if let Some(r) = &mut l.w_res {
                out.push(r);
            }
            if let Some(a) = &mut l.attn {
                out.push(a);
            }
        }
        out.push(&mut self.classifier);
        out
    }

    /// Total entry count over trainable tensors.
    pub fn n_trainable(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|t| t.trainable)
            .map(|t| t.numel())
            .sum()
    }

    /// Registers every tensor as a tape leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<BoundModel> {
        let mut node_proj = Vec::with_capacity(self.node_proj.len());
        for p in &self.node_proj {
            let w = tape.leaf(&p.w.shape, p.w.values.clone())?;
            let b = tape.leaf(&p.b.shape, p.b.values.clone())?;
            node_proj.push((w, b));
        }
        let edge_table = tape.leaf(
            &self.edge_table.weights.shape,
            self.edge_table.weights.values.clone(),
        )?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let w_rel = tape.leaf(&l.w_rel.shape, l.w_rel.values.clone())?;
            let w = tape.leaf(&l.w.shape, l.w.values.clone())?;
            let w_res = match &l.w_res {
                Some(r) => Some(tape.leaf(&r.shape, r.values.clone())?),
                None => None,
            };
            let attn = match &l.attn {
                Some(a) => Some(tape.leaf(&a.shape, a.values.clone())?),
                None => None,
            };
            layers.push(BoundLayer {
                w_rel,
                w,
                w_res,
                attn,
            });
        }
        let classifier = tape.leaf(&self.classifier.shape, self.classifier.values.clone())?;
        Ok(BoundModel {
            node_proj,
            edge_table,
            layers,
            classifier,
        })
    }
}

/// Tape leaf ids for one layer.
#[derive(Debug, Clone)]
pub struct BoundLayer {
    pub w_rel: TensorId,
    pub w: TensorId,
    pub w_res: Option<TensorId>,
    pub attn: Option<TensorId>,
}

/// Tape leaf ids for the whole model, mirroring [`ModelParams`].
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub node_proj: Vec<(TensorId, TensorId)>,
    pub edge_table: TensorId,
    pub layers: Vec<BoundLayer>,
    pub classifier: TensorId,
}

impl BoundModel {
    /// Flat id list in the same order as [`ModelParams::tensors`].
    pub fn flat_ids(&self) -> Vec<TensorId> {
        let mut out = Vec::new();
        for &(w, b) in &self.node_proj {
            out.push(w);
            out.push(b);
        }
        out.push(self.edge_table);
        for l in &self.layers {
            out.push(l.w_rel);
            out.push(l.w);
            if let Some(r) = l.w_res {
                out.push(r);
            }
            if let Some(a) = l.attn {
                out.push(a);
            }
        }
        out.push(self.classifier);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;

    fn meta() -> GraphMeta {
        GraphMeta {
            input_dims: vec![3, 5],
            n_edge_types: 6,
            n_classes: 4,
        }
    }

    #[test]
    fn table_has_one_row_per_type() {
        let t = edge_type_init(6, 64, 0, EdgeInit::Typed);
        assert_eq!(t.weights.shape, vec![6, 64]);
        assert!(t.weights.trainable);
        // two edges of the same type resolve to the same row
        assert_eq!(t.row(3).unwrap(), t.row(3).unwrap());
        assert!(t.row_index(6).is_err());
    }

    #[test]
    fn table_init_is_deterministic() {
        let a = edge_type_init(4, 8, 99, EdgeInit::Typed);
        let b = edge_type_init(4, 8, 99, EdgeInit::Typed);
        assert_eq!(a, b);
    }

    #[test]
    fn frozen_table_excluded_from_trainables_and_type_blind() {
        let t = edge_type_init(4, 8, 0, EdgeInit::RandomFrozen);
        assert!(!t.weights.trainable);
        for ty in 1..4 {
            assert_eq!(t.row(ty).unwrap(), t.row(0).unwrap());
        }
    }

    #[test]
    fn init_layout_matches_config() {
        let mut cfg = ModelConfig::default();
        cfg.n_layers = 2;
        cfg.dims = vec![8, 8, 4];
        cfg.edge_dim = 5;
        let p = ModelParams::init(&meta(), &cfg).unwrap();
        assert_eq!(p.node_proj.len(), 2);
        assert_eq!(p.node_proj[0].w.shape, vec![3, 8]);
        assert_eq!(p.node_proj[1].w.shape, vec![5, 8]);
        assert_eq!(p.layers[0].w_rel.shape, vec![5, 8]);
        assert!(p.layers[0].w_res.is_none(), "same dims need no residual map");
        assert!(p.layers[1].w_res.is_some(), "dim change requires residual map");
        assert_eq!(p.layers[1].attn.as_ref().unwrap().shape, vec![2 * 4 + 8, 1]);
        assert_eq!(p.classifier.shape, vec![4, 4]);
        // bind order matches tensors order
        let mut tape = Tape::new();
        let bound = p.bind(&mut tape).unwrap();
        assert_eq!(bound.flat_ids().len(), p.tensors().len());
        for (id, t) in bound.flat_ids().iter().zip(p.tensors()) {
            assert_eq!(tape.values(*id), t.values.as_slice());
        }
    }

    #[test]
    fn same_seed_same_params() {
        let cfg = ModelConfig::default();
        let a = ModelParams::init(&meta(), &cfg).unwrap();
        let b = ModelParams::init(&meta(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
