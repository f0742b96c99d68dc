//! One propagation layer: feature projection, edge-type relation mapping,
//! Hadamard-filtered message passing, and the aggregation variants.
//!
//! Per layer, each arc `j -> i` of type `t` carries the message
//! `h_j ⊙ r_t`, where `r_t = LeakyReLU(table[t] · w_rel)` is the layer's
//! relation vector for that edge type. Every arc of equal type uses the
//! same relation row, so the filter magnifies or shrinks individual feature
//! dimensions per type rather than rescaling whole messages. Aggregation
//! sums messages over each in-neighborhood; the residual modes add the
//! node's own state and weight arcs by attention scores normalized within
//! the neighborhood.

use std::rc::Rc;

use crate::autodiff::{Tape, TensorId};
use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::model::AggMode;
use crate::params::BoundLayer;

pub use crate::params::{edge_type_init, EdgeInit, EdgeTypeTable};

/// Relation vectors for one layer, before and after the nonlinearity.
/// The Hadamard filter uses `act`; attention scores use `lin`.
#[derive(Debug, Clone, Copy)]
pub struct RelationMap {
    pub lin: TensorId,
    pub act: TensorId,
}

/// Projects every node type into the shared `d0`-dimensional space:
/// `LeakyReLU(F_t · W_t + b_t)`, scattered back into node order.
/// `no_nle` drops the activation and keeps the purely linear map.
pub fn feature_project(
    tape: &mut Tape,
    graph: &HeteroGraph,
    proj: &[(TensorId, TensorId)],
    slope: f64,
    no_nle: bool,
) -> Result<TensorId> {
    if proj.len() != graph.n_node_types() {
        return Err(Error::Config(format!(
            "have {} projections for {} node types",
            proj.len(),
            graph.n_node_types()
        )));
    }
    let n = graph.n_nodes();
    let mut h0: Option<TensorId> = None;
    for (t, tf) in graph.features().iter().enumerate() {
        if tf.nodes.is_empty() {
            continue;
        }
        let (w, b) = proj[t];
        let w_rows = tape.shape(w)[0];
        if w_rows != tf.dim {
            return Err(Error::Projection {
                node_type: t,
                expected: w_rows,
                got: tf.dim,
            });
        }
        let f = tape.leaf(&[tf.nodes.len(), tf.dim], tf.data.clone())?;
        let x = tape.matmul(f, w)?;
        let x = tape.add(x, b)?;
        let x = if no_nle { x } else { tape.leaky_relu(x, slope)? };
        let scattered = tape.scatter_rows(x, Rc::new(tf.nodes.clone()), n)?;
        h0 = Some(match h0 {
            None => scattered,
            Some(acc) => tape.add(acc, scattered)?,
        });
    }
    h0.ok_or_else(|| Error::Graph("no node features to project".into()))
}

/// Maps the edge-type table into the layer's feature space:
/// `lin = table · w_rel`, `act = LeakyReLU(lin)`.
pub fn edge_relation_map(
    tape: &mut Tape,
    table: TensorId,
    w_rel: TensorId,
    slope: f64,
) -> Result<RelationMap> {
    let lin = tape.matmul(table, w_rel)?;
    let act = tape.leaky_relu(lin, slope)?;
    Ok(RelationMap { lin, act })
}

/// Builds one message per directed arc: `M = h_src ⊙ r_type`.
/// With `relations = None` (the filter ablation) messages are plain copies
/// of the source representation, exactly as if every relation were all-ones.
pub fn propagate(
    tape: &mut Tape,
    h: TensorId,
    relations: Option<TensorId>,
    graph: &HeteroGraph,
) -> Result<TensorId> {
    let arcs = graph.arcs();
    let h_src = tape.gather_rows(h, Rc::clone(&arcs.src))?;
    match relations {
        None => Ok(h_src),
        Some(rel) => {
            let rows = tape.shape(rel)[0];
            if let Some(&bad) = arcs.etype.iter().find(|&&t| t >= rows) {
                return Err(Error::UnknownEdgeType {
                    etype: bad,
                    table_len: rows,
                });
            }
            let r_arc = tape.gather_rows(rel, Rc::clone(&arcs.etype))?;
            tape.hadamard(h_src, r_arc)
        }
    }
}

/// Per-arc attention, normalized over each in-neighborhood:
/// `softmax_i(LeakyReLU(a_dst·Wh_i + a_src·Wh_j + a_rel·(table[t]·w_rel)))`.
pub fn attention_scores(
    tape: &mut Tape,
    h_proj: TensorId,
    rel_lin: TensorId,
    attn: TensorId,
    graph: &HeteroGraph,
    slope: f64,
) -> Result<TensorId> {
    let d_out = tape.shape(h_proj)[1];
    let d_in = tape.shape(rel_lin)[1];
    let len = tape.shape(attn)[0];
    if len != 2 * d_out + d_in {
        return Err(Error::ShapeMismatch {
            op: "attention_scores",
            lhs: tape.shape(attn).to_vec(),
            rhs: vec![2 * d_out + d_in, 1],
        });
    }
    let a_dst = tape.gather_rows(attn, Rc::new((0..d_out).collect()))?;
    let a_src = tape.gather_rows(attn, Rc::new((d_out..2 * d_out).collect()))?;
    let a_rel = tape.gather_rows(attn, Rc::new((2 * d_out..len).collect()))?;

    let u = tape.matmul(h_proj, a_dst)?; // [n, 1]
    let v = tape.matmul(h_proj, a_src)?; // [n, 1]
    let w = tape.matmul(rel_lin, a_rel)?; // [n_types, 1]

    let arcs = graph.arcs();
    let e_dst = tape.gather_rows(u, Rc::clone(&arcs.dst))?;
    let e_src = tape.gather_rows(v, Rc::clone(&arcs.src))?;
    let e_rel = tape.gather_rows(w, Rc::clone(&arcs.etype))?;
    let e = tape.add(e_dst, e_src)?;
    let e = tape.add(e, e_rel)?;
    let e = tape.leaky_relu(e, slope)?;
    tape.segment_softmax(e, Rc::clone(&arcs.offsets))
}

/// Sums each node's incoming messages and produces the next representation.
///
/// - `PlainSum`: `σ((Σ_j M_ij) · W)`.
/// - `NodeResidual`: `σ(Σ_j α_ij (M_ij · W) + res(h_i))` with `res` the
///   identity, or `W_res` on a dimension change.
/// - `EdgeResidual`: as `NodeResidual`, with `α = (1-β)·α̂ + β·α_prev`
///   (`α = α̂` on the first layer).
///
/// Empty neighborhoods contribute a zero sum, so isolated nodes keep
/// `σ(res(h_i))` in the residual modes. Returns the new representations and
/// the per-arc attention used (absent for `PlainSum`).
#[allow(clippy::too_many_arguments)]
pub fn aggregate(
    tape: &mut Tape,
    h: TensorId,
    messages: TensorId,
    layer: &BoundLayer,
    mode: AggMode,
    beta: f64,
    alpha_prev: Option<TensorId>,
    rel_lin: TensorId,
    graph: &HeteroGraph,
    slope: f64,
) -> Result<(TensorId, Option<TensorId>)> {
    let arcs = graph.arcs();
    let d_in = tape.shape(h)[1];
    let d_out = tape.shape(layer.w)[1];

    if mode == AggMode::PlainSum {
        let summed = tape.segment_sum(messages, Rc::clone(&arcs.offsets))?;
        let projected = tape.matmul(summed, layer.w)?;
        let out = tape.leaky_relu(projected, slope)?;
        return Ok((out, None));
    }

    let attn = layer.attn.ok_or_else(|| {
        Error::Config("residual aggregation requires an attention vector".into())
    })?;
    let h_proj = tape.matmul(h, layer.w)?;
    let alpha_hat = attention_scores(tape, h_proj, rel_lin, attn, graph, slope)?;

    let alpha = match mode {
        AggMode::NodeResidual => alpha_hat,
        AggMode::EdgeResidual => match alpha_prev {
            None => alpha_hat,
            Some(prev) => {
                if tape.shape(prev) != tape.shape(alpha_hat) {
                    return Err(Error::ShapeMismatch {
                        op: "aggregate: alpha_prev arc set",
                        lhs: tape.shape(prev).to_vec(),
                        rhs: tape.shape(alpha_hat).to_vec(),
                    });
                }
                let new_part = tape.scale(alpha_hat, 1.0 - beta)?;
                let old_part = tape.scale(prev, beta)?;
                tape.add(new_part, old_part)?
            }
        },
        AggMode::PlainSum => unreachable!(),
    };

    let mw = tape.matmul(messages, layer.w)?;
    let weighted = tape.mul_col(mw, alpha)?;
    let summed = tape.segment_sum(weighted, Rc::clone(&arcs.offsets))?;

    let residual = if d_in == d_out {
        h
    } else {
        let w_res = layer.w_res.ok_or_else(|| {
            Error::Config(format!(
                "dimension change {d_in} -> {d_out} requires a residual projection"
            ))
        })?;
        tape.matmul(h, w_res)?
    };
    let pre = tape.add(summed, residual)?;
    let out = tape.leaky_relu(pre, slope)?;
    Ok((out, Some(alpha)))
}

/// Output of one full layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerOutput {
    pub h: TensorId,
    pub alpha: Option<TensorId>,
}

/// Relation mapping, propagation, and aggregation for one layer.
#[allow(clippy::too_many_arguments)]
pub fn layer_forward(
    tape: &mut Tape,
    h: TensorId,
    layer: &BoundLayer,
    edge_table: TensorId,
    graph: &HeteroGraph,
    mode: AggMode,
    beta: f64,
    slope: f64,
    no_fgl: bool,
    alpha_prev: Option<TensorId>,
) -> Result<LayerOutput> {
    let rel = edge_relation_map(tape, edge_table, layer.w_rel, slope)?;
    let filter = if no_fgl { None } else { Some(rel.act) };
    let messages = propagate(tape, h, filter, graph)?;
    let (h_next, alpha) = aggregate(
        tape, h, messages, layer, mode, beta, alpha_prev, rel.lin, graph, slope,
    )?;
    Ok(LayerOutput { h: h_next, alpha })
}
