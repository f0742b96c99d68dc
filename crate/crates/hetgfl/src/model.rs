//! Full model: stacked propagation layers, normalized output head,
//! prediction and loss.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, TensorId};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::layers::{feature_project, layer_forward};
use crate::params::{BoundModel, ModelParams};

/// Aggregation variant of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggMode {
    /// Unweighted neighborhood sum followed by the projection.
    PlainSum,
    /// Attention-weighted sum plus a pre-activation residual connection.
    NodeResidual,
    /// NodeResidual with attention scores blended across layers by `beta`.
    EdgeResidual,
}

impl FromStr for AggMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "plain-sum" => Ok(Self::PlainSum),
            "node-residual" => Ok(Self::NodeResidual),
            "edge-residual" => Ok(Self::EdgeResidual),
            other => Err(format!(
                "unknown aggregation `{other}` (expected plain-sum, node-residual or edge-residual)"
            )),
        }
    }
}

/// Classification head and loss pairing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Single-label: row softmax with cross-entropy.
    SoftmaxCe,
    /// Multi-label: elementwise sigmoid with binary cross-entropy.
    SigmoidBce,
}

impl FromStr for LossMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "softmax-ce" => Ok(Self::SoftmaxCe),
            "sigmoid-bce" => Ok(Self::SigmoidBce),
            other => Err(format!(
                "unknown loss `{other}` (expected softmax-ce or sigmoid-bce)"
            )),
        }
    }
}

/// Component switches for ablation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Ablations {
    /// Replace relation filters with all-ones (no feature-preference filter).
    pub no_fgl: bool,
    /// Skip L2 normalization of the output embedding.
    pub no_l2: bool,
    /// Drop the nonlinearity in the input projection.
    pub no_nle: bool,
    /// Freeze the edge-type table at random values.
    pub no_ei: bool,
}

impl Ablations {
    pub fn set(&mut self, name: &str) -> std::result::Result<(), String> {
        match name {
            "no-fgl" => self.no_fgl = true,
            "no-l2" => self.no_l2 = true,
            "no-nle" => self.no_nle = true,
            "no-ei" => self.no_ei = true,
            other => {
                return Err(format!(
                    "unknown ablation `{other}` (expected no-fgl, no-l2, no-nle or no-ei)"
                ))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    /// Layer widths `d_0..d_L`, length `n_layers + 1`.
    pub dims: Vec<usize>,
    /// Width of the edge-type embedding rows.
    pub edge_dim: usize,
    pub agg: AggMode,
    /// Attention blend factor for `EdgeResidual`, in `[0, 1]`.
    pub beta: f64,
    pub leaky_slope: f64,
    pub loss: LossMode,
    pub ablations: Ablations,
    /// Penalty weight on the squared parameter norm.
    pub weight_decay: f64,
    /// Penalize the unsquared norm instead of the squared one.
    pub unsquared_penalty: bool,
    /// Parameter initialization seed.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            dims: vec![64, 64, 64],
            edge_dim: 64,
            agg: AggMode::EdgeResidual,
            beta: 0.05,
            leaky_slope: 0.01,
            loss: LossMode::SoftmaxCe,
            ablations: Ablations::default(),
            weight_decay: 5e-4,
            unsquared_penalty: false,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Uniform-width config: `n_layers` layers of width `dim`.
    pub fn uniform(n_layers: usize, dim: usize) -> Self {
        Self {
            n_layers,
            dims: vec![dim; n_layers + 1],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Config("need at least one layer".into()));
        }
        if self.dims.len() != self.n_layers + 1 {
            return Err(Error::Config(format!(
                "dims has {} entries for {} layers (want n_layers + 1)",
                self.dims.len(),
                self.n_layers
            )));
        }
        if self.dims.iter().any(|&d| d == 0) || self.edge_dim == 0 {
            return Err(Error::Config("all dims must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta {} outside [0, 1]", self.beta)));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::Config(format!(
                "leaky slope {} outside (0, 1)",
                self.leaky_slope
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Tape handles produced by one forward pass.
pub struct ForwardPass {
    pub bound: BoundModel,
    /// Last-layer representations before normalization.
    pub h_last: TensorId,
    /// Output embedding `O` (normalized rows unless the L2 ablation is on).
    pub embeddings: TensorId,
    pub logits: TensorId,
    /// Class probabilities `Z`: row softmax or elementwise sigmoid.
    pub probs: TensorId,
}

/// Runs the whole model on a fresh tape.
pub fn forward(
    tape: &mut Tape,
    graph: &HeteroGraph,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<ForwardPass> {
    config.validate()?;
    if params.layers.len() != config.n_layers {
        return Err(Error::Config(format!(
            "params hold {} layers, config wants {}",
            params.layers.len(),
            config.n_layers
        )));
    }
    let bound = params.bind(tape)?;
    let slope = config.leaky_slope;

    let mut h = feature_project(tape, graph, &bound.node_proj, slope, config.ablations.no_nle)?;
    let mut alpha = None;
    for layer in &bound.layers {
        let out = layer_forward(
            tape,
            h,
            layer,
            bound.edge_table,
            graph,
            config.agg,
            config.beta,
            slope,
            config.ablations.no_fgl,
            alpha,
        )?;
        h = out.h;
        alpha = out.alpha;
    }

    let embeddings = if config.ablations.no_l2 {
        h
    } else {
        tape.l2_normalize_rows(h)?
    };
    let logits = tape.matmul(embeddings, bound.classifier)?;
    let probs = match config.loss {
        LossMode::SoftmaxCe => tape.softmax_rows(logits)?,
        LossMode::SigmoidBce => tape.sigmoid(logits)?,
    };
    Ok(ForwardPass {
        bound,
        h_last: h,
        embeddings,
        logits,
        probs,
    })
}

/// Cross-entropy (or binary cross-entropy) over the masked nodes, plus the
/// weight-decay penalty when `include_penalty` is set.
///
/// Probabilities are clamped at `1e-12` before the log. The penalty sums
/// squared entries over trainable tensors; with `unsquared_penalty` the
/// square root of that sum is used instead.
pub fn loss(
    tape: &mut Tape,
    pass: &ForwardPass,
    graph: &HeteroGraph,
    mask: &[bool],
    params: &ModelParams,
    config: &ModelConfig,
    include_penalty: bool,
) -> Result<TensorId> {
    let n = graph.n_nodes();
    let c = graph.n_classes();
    if mask.len() != n {
        return Err(Error::Config("mask length differs from node count".into()));
    }
    if !mask.iter().any(|&b| b) {
        return Err(Error::Config("loss mask selects no nodes".into()));
    }
    if tape.values(pass.probs).iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss);
    }

    let y = graph.label_matrix();
    let mut y_masked = vec![0.0; n * c];
    for i in 0..n {
        if mask[i] {
            y_masked[i * c..(i + 1) * c].copy_from_slice(&y[i * c..(i + 1) * c]);
        }
    }

    const FLOOR: f64 = 1e-12;
    let data = match config.loss {
        LossMode::SoftmaxCe => {
            let y_leaf = tape.leaf(&[n, c], y_masked)?;
            let logz = tape.log_clamped(pass.probs, FLOOR)?;
            let picked = tape.hadamard(logz, y_leaf)?;
            let total = tape.sum_all(picked)?;
            tape.scale(total, -1.0)?
        }
        LossMode::SigmoidBce => {
            // complement indicator, masked the same way
            let mut y_comp = vec![0.0; n * c];
            for i in 0..n {
                if mask[i] {
                    for j in 0..c {
                        y_comp[i * c + j] = 1.0 - y[i * c + j];
                    }
                }
            }
            let y_leaf = tape.leaf(&[n, c], y_masked)?;
            let yc_leaf = tape.leaf(&[n, c], y_comp)?;
            let ones = tape.leaf(&[n, c], vec![1.0; n * c])?;
            let logz = tape.log_clamped(pass.probs, FLOOR)?;
            let zc = tape.sub(ones, pass.probs)?;
            let logzc = tape.log_clamped(zc, FLOOR)?;
            let pos = tape.hadamard(logz, y_leaf)?;
            let neg = tape.hadamard(logzc, yc_leaf)?;
            let pos_sum = tape.sum_all(pos)?;
            let neg_sum = tape.sum_all(neg)?;
            let total = tape.add(pos_sum, neg_sum)?;
            tape.scale(total, -1.0)?
        }
    };

    if !include_penalty || config.weight_decay == 0.0 {
        return Ok(data);
    }
    let mut penalty: Option<TensorId> = None;
    for (tensor, id) in params.tensors().iter().zip(pass.bound.flat_ids()) {
        if !tensor.trainable {
            continue;
        }
        let sq = tape.sum_sq(id)?;
        penalty = Some(match penalty {
            None => sq,
            Some(acc) => tape.add(acc, sq)?,
        });
    }
    match penalty {
        None => Ok(data),
        Some(p) => {
            let p = if config.unsquared_penalty {
                tape.sqrt_elem(p)?
            } else {
                p
            };
            let scaled = tape.scale(p, config.weight_decay)?;
            tape.add(data, scaled)
        }
    }
}

/// Hard predictions from the probability matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    /// Arg-max class per node.
    SingleLabel(Vec<usize>),
    /// Row-major `n x c` indicators, thresholded at 0.5.
    MultiLabel(Vec<bool>),
}

pub fn predict(probs: &[f64], n: usize, c: usize, mode: LossMode) -> Predictions {
    debug_assert_eq!(probs.len(), n * c);
    match mode {
        LossMode::SoftmaxCe => {
            let labels = (0..n)
                .map(|i| {
                    let row = &probs[i * c..(i + 1) * c];
                    let mut best = 0;
                    for (j, &v) in row.iter().enumerate() {
                        if v > row[best] {
                            best = j;
                        }
                    }
                    best
                })
                .collect();
            Predictions::SingleLabel(labels)
        }
        LossMode::SigmoidBce => Predictions::MultiLabel(probs.iter().map(|&v| v >= 0.5).collect()),
    }
}
