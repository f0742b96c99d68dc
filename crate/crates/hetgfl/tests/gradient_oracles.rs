//! Gradient verification and independent layer oracles.
//!
//! The naive layer below recomputes everything with plain loops and no
//! tape; the GCN oracle implements the symmetric-normalized convolution
//! directly. Both stay independent of the library's forward path.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hetgfl::graph::{GraphParts, HeteroGraph};
use hetgfl::model::{AggMode, LossMode, ModelConfig};
use hetgfl::params::{GraphMeta, ModelParams};
use hetgfl::{forward, grad_check, loss, Tape};

fn leaky(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..cols)
        .map(|j| (0..rows).map(|i| v[i] * m[i * cols + j]).sum())
        .collect()
}

/// Six nodes, two node types, three edge types, with a dimension change
/// between the layers so the residual projection is exercised.
fn grad_fixture() -> (HeteroGraph, ModelConfig) {
    let parts = GraphParts {
        node_type: vec![0, 1, 0, 1, 0, 1],
        features: vec![
            Some(vec![0.3, -0.7]),
            Some(vec![0.9, 0.1, -0.4]),
            Some(vec![-0.2, 0.5]),
            Some(vec![0.4, -0.6, 0.2]),
            Some(vec![0.8, 0.05]),
            Some(vec![-0.3, 0.7, 0.6]),
        ],
        edges: vec![
            (0, 1, 0),
            (1, 2, 1),
            (2, 3, 2),
            (3, 4, 0),
            (4, 5, 1),
            (5, 0, 2),
            (0, 3, 1),
        ],
        labels: (0..6).map(|i| (i, vec![i % 2])).collect(),
        split: None,
    };
    let graph = HeteroGraph::from_parts(parts).unwrap();
    let config = ModelConfig {
        n_layers: 2,
        dims: vec![4, 4, 3],
        edge_dim: 3,
        agg: AggMode::EdgeResidual,
        beta: 0.3,
        weight_decay: 1e-3,
        seed: 11,
        ..ModelConfig::default()
    };
    (graph, config)
}

fn model_grad_check(graph: &HeteroGraph, config: &ModelConfig, mask: &[bool]) -> f64 {
    let params = ModelParams::init(&GraphMeta::of(graph), config).unwrap();
    let base: Vec<Vec<f64>> = params.tensors().iter().map(|t| t.values.clone()).collect();
    grad_check(
        |vals| {
            let mut p = params.clone();
            for (t, v) in p.tensors_mut().into_iter().zip(vals) {
                t.values = v.clone();
            }
            let mut tape = Tape::new();
            let pass = forward(&mut tape, graph, &p, config)?;
            let l = loss(&mut tape, &pass, graph, mask, &p, config, true)?;
            Ok((tape, l, pass.bound.flat_ids()))
        },
        &base,
        1e-5,
    )
    .unwrap()
}

#[test]
fn full_two_layer_model_gradients_check() {
    let (graph, config) = grad_fixture();
    let mask = vec![true, true, false, true, false, true];
    let err = model_grad_check(&graph, &config, &mask);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn single_layer_five_node_gradients_check() {
    let parts = GraphParts {
        node_type: vec![0, 0, 1, 1, 0],
        features: vec![
            Some(vec![0.2, -0.5]),
            Some(vec![-0.1, 0.8]),
            Some(vec![0.7]),
            Some(vec![-0.9]),
            Some(vec![0.4, 0.3]),
        ],
        edges: vec![(0, 1, 0), (1, 2, 1), (2, 3, 0), (3, 4, 1), (4, 0, 0)],
        labels: (0..5).map(|i| (i, vec![i % 2])).collect(),
        split: None,
    };
    let graph = HeteroGraph::from_parts(parts).unwrap();
    let config = ModelConfig {
        n_layers: 1,
        dims: vec![3, 3],
        edge_dim: 2,
        agg: AggMode::NodeResidual,
        weight_decay: 0.0,
        seed: 5,
        ..ModelConfig::default()
    };
    let err = model_grad_check(&graph, &config, &[true; 5]);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn sigmoid_bce_gradients_check() {
    let (graph, mut config) = grad_fixture();
    config.loss = LossMode::SigmoidBce;
    config.seed = 23;
    let mask = vec![true; 6];
    let err = model_grad_check(&graph, &config, &mask);
    assert!(err <= 1e-4, "max relative error {err}");
}

#[test]
fn frozen_table_and_ablations_still_check() {
    let (graph, mut config) = grad_fixture();
    config.ablations.no_ei = true;
    config.ablations.no_nle = true;
    let mask = vec![true; 6];
    let err = model_grad_check(&graph, &config, &mask);
    assert!(err <= 1e-4, "max relative error {err}");
}

// ---------------------------------------------------------------------
// GCN reduction: with per-arc relations frozen to gcn_norm * ones and
// plain-sum aggregation, the layer must match an independently coded
// symmetric-normalized convolution with self-loops.
// ---------------------------------------------------------------------

struct GcnCase {
    /// Base undirected edges (no self-loops).
    edges: Vec<(usize, usize)>,
    n: usize,
}

fn random_connected_graph(rng: &mut ChaCha8Rng) -> GcnCase {
    let n = rng.gen_range(4..12);
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i));
    }
    for _ in 0..rng.gen_range(0..n) {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && !edges.contains(&(u.min(v), u.max(v))) {
            edges.push((u.min(v), u.max(v)));
        }
    }
    GcnCase { edges, n }
}

/// Direct implementation of the symmetric-normalized convolution:
/// `h_i' = act(sum_{j in N_i ∪ {i}} h_j / sqrt(|N_i||N_j|) · W)`.
fn gcn_oracle(case: &GcnCase, h: &[f64], d: usize, w: &[f64], d_out: usize, slope: f64) -> Vec<f64> {
    let mut deg = vec![0usize; case.n];
    for &(u, v) in &case.edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    let mut out = vec![0.0; case.n * d_out];
    for i in 0..case.n {
        let mut agg = vec![0.0; d];
        let mut add = |j: usize, factor: f64| {
            for (a, x) in agg.iter_mut().zip(&h[j * d..(j + 1) * d]) {
                *a += factor * x;
            }
        };
        for &(u, v) in &case.edges {
            if u == i {
                add(v, 1.0 / ((deg[i] * deg[v]) as f64).sqrt());
            } else if v == i {
                add(u, 1.0 / ((deg[i] * deg[u]) as f64).sqrt());
            }
        }
        add(i, 1.0 / deg[i] as f64);
        let projected = matvec(w, d, d_out, &agg);
        for (o, p) in out[i * d_out..(i + 1) * d_out].iter_mut().zip(&projected) {
            *o = leaky(*p, slope);
        }
    }
    out
}

#[test]
fn gcn_reduction_matches_oracle_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let slope = 0.01;
    let (d, d_out) = (3usize, 2usize);
    for case_idx in 0..50 {
        let case = random_connected_graph(&mut rng);
        let n = case.n;
        let mut deg = vec![0usize; n];
        for &(u, v) in &case.edges {
            deg[u] += 1;
            deg[v] += 1;
        }

        // augmented graph: base edges plus explicit self-loops, one edge
        // type per undirected edge so each arc can carry its own constant
        let mut edges: Vec<(usize, usize, usize)> = case
            .edges
            .iter()
            .enumerate()
            .map(|(t, &(u, v))| (u, v, t))
            .collect();
        let m_base = edges.len();
        for i in 0..n {
            edges.push((i, i, m_base + i));
        }
        let graph = HeteroGraph::from_parts(GraphParts {
            node_type: vec![0; n],
            features: vec![None; n],
            edges,
            labels: vec![(0, vec![0])],
            split: None,
        })
        .unwrap();

        // per-type relation rows: gcn_norm * ones
        let n_types = m_base + n;
        let mut rel_rows = vec![0.0; n_types * d];
        for (t, &(u, v)) in case.edges.iter().enumerate() {
            let factor = 1.0 / ((deg[u] * deg[v]) as f64).sqrt();
            rel_rows[t * d..(t + 1) * d].fill(factor);
        }
        for i in 0..n {
            let t = m_base + i;
            rel_rows[t * d..(t + 1) * d].fill(1.0 / deg[i] as f64);
        }

        let h_vals: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w_vals: Vec<f64> = (0..d * d_out).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let mut tape = Tape::new();
        let h = tape.leaf(&[n, d], h_vals.clone()).unwrap();
        let rel = tape.leaf(&[n_types, d], rel_rows).unwrap();
        let w = tape.leaf(&[d, d_out], w_vals.clone()).unwrap();
        let messages = hetgfl::propagate(&mut tape, h, Some(rel), &graph).unwrap();
        let summed = tape
            .segment_sum(messages, Rc::clone(&graph.arcs().offsets))
            .unwrap();
        let projected = tape.matmul(summed, w).unwrap();
        let ours = tape.leaky_relu(projected, slope).unwrap();

        let oracle = gcn_oracle(&case, &h_vals, d, &w_vals, d_out, slope);
        for (idx, (a, b)) in tape.values(ours).iter().zip(&oracle).enumerate() {
            assert!(
                (a - b).abs() <= 1e-10,
                "case {case_idx}, entry {idx}: {a} vs {b}"
            );
        }
    }
}

// ---------------------------------------------------------------------
// Brute-force layer oracle for the aggregation variants.
// ---------------------------------------------------------------------

struct NaiveParams {
    table: Vec<f64>,
    w_rel: Vec<f64>,
    w: Vec<f64>,
    attn: Vec<f64>,
    edge_dim: usize,
    d: usize,
}

/// Plain-loop recomputation of one layer (equal in/out dims, no W_res).
fn naive_layer(
    graph: &HeteroGraph,
    h: &[f64],
    p: &NaiveParams,
    mode: AggMode,
    beta: f64,
    alpha_prev: Option<&[f64]>,
    slope: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = graph.n_nodes();
    let d = p.d;
    let arcs = graph.arcs();
    let m = arcs.n_arcs();

    // per-type relations
    let n_types = graph.n_edge_types();
    let mut rel_lin = vec![0.0; n_types * d];
    let mut rel_act = vec![0.0; n_types * d];
    for t in 0..n_types {
        let lin = matvec(
            &p.w_rel,
            p.edge_dim,
            d,
            &p.table[t * p.edge_dim..(t + 1) * p.edge_dim],
        );
        for j in 0..d {
            rel_lin[t * d + j] = lin[j];
            rel_act[t * d + j] = leaky(lin[j], slope);
        }
    }

    // attention scores per arc
    let mut alpha = vec![0.0; m];
    if mode != AggMode::PlainSum {
        let hw: Vec<Vec<f64>> = (0..n).map(|i| matvec(&p.w, d, d, &h[i * d..(i + 1) * d])).collect();
        let mut raw = vec![0.0; m];
        for a in 0..m {
            let (src, dst, t) = (arcs.src[a], arcs.dst[a], arcs.etype[a]);
            let mut score = 0.0;
            for j in 0..d {
                score += p.attn[j] * hw[dst][j];
                score += p.attn[d + j] * hw[src][j];
                score += p.attn[2 * d + j] * rel_lin[t * d + j];
            }
            raw[a] = leaky(score, slope);
        }
        for i in 0..n {
            let (lo, hi) = (arcs.offsets[i], arcs.offsets[i + 1]);
            if lo == hi {
                continue;
            }
            let max = raw[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = raw[lo..hi].iter().map(|&x| (x - max).exp()).sum();
            for a in lo..hi {
                let hat = (raw[a] - max).exp() / sum;
                alpha[a] = match (mode, alpha_prev) {
                    (AggMode::EdgeResidual, Some(prev)) => (1.0 - beta) * hat + beta * prev[a],
                    _ => hat,
                };
            }
        }
    }

    let mut out = vec![0.0; n * d];
    for i in 0..n {
        let mut acc = vec![0.0; d];
        for a in arcs.offsets[i]..arcs.offsets[i + 1] {
            let (src, t) = (arcs.src[a], arcs.etype[a]);
            let msg: Vec<f64> = (0..d)
                .map(|j| h[src * d + j] * rel_act[t * d + j])
                .collect();
            match mode {
                AggMode::PlainSum => {
                    for (ac, v) in acc.iter_mut().zip(&msg) {
                        *ac += v;
                    }
                }
                _ => {
                    let mw = matvec(&p.w, d, d, &msg);
                    for (ac, v) in acc.iter_mut().zip(&mw) {
                        *ac += alpha[a] * v;
                    }
                }
            }
        }
        let pre: Vec<f64> = match mode {
            AggMode::PlainSum => matvec(&p.w, d, d, &acc),
            _ => (0..d).map(|j| acc[j] + h[i * d + j]).collect(),
        };
        for (j, v) in pre.iter().enumerate() {
            out[i * d + j] = leaky(*v, slope);
        }
    }
    (out, alpha)
}

#[test]
fn layer_matches_naive_oracle_in_every_mode() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for mode in [AggMode::PlainSum, AggMode::NodeResidual, AggMode::EdgeResidual] {
        for trial in 0..10 {
            let n = rng.gen_range(4..10);
            let n_types = rng.gen_range(1..4);
            let mut edges = Vec::new();
            for i in 1..n {
                edges.push((rng.gen_range(0..i), i, rng.gen_range(0..n_types)));
            }
            // leave node 0 isolated in some trials to hit the empty-sum path
            let isolate = trial % 3 == 0 && mode != AggMode::PlainSum;
            let edges: Vec<_> = if isolate {
                edges.into_iter().filter(|&(u, v, _)| u != 0 && v != 0).collect()
            } else {
                edges
            };
            let graph = HeteroGraph::from_parts(GraphParts {
                node_type: vec![0; n],
                features: vec![None; n],
                edges,
                labels: vec![(0, vec![0])],
                split: None,
            })
            .unwrap();

            let (d, edge_dim) = (3usize, 2usize);
            let p = NaiveParams {
                table: (0..graph.n_edge_types() * edge_dim)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
                w_rel: (0..edge_dim * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                w: (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                attn: (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                edge_dim,
                d,
            };
            let h_vals: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let m = graph.arcs().n_arcs();
            let prev: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let beta = 0.4;
            let slope = 0.01;

            let mut tape = Tape::new();
            let h = tape.leaf(&[n, d], h_vals.clone()).unwrap();
            let table = tape
                .leaf(&[graph.n_edge_types(), edge_dim], p.table.clone())
                .unwrap();
            let w_rel = tape.leaf(&[edge_dim, d], p.w_rel.clone()).unwrap();
            let w = tape.leaf(&[d, d], p.w.clone()).unwrap();
            let attn = tape.leaf(&[3 * d, 1], p.attn.clone()).unwrap();
            let layer = hetgfl::params::BoundLayer {
                w_rel,
                w,
                w_res: None,
                attn: Some(attn),
            };
            let rel = hetgfl::edge_relation_map(&mut tape, table, w_rel, slope).unwrap();
            let messages = hetgfl::propagate(&mut tape, h, Some(rel.act), &graph).unwrap();
            let alpha_prev = match mode {
                AggMode::EdgeResidual => Some(tape.leaf(&[m, 1], prev.clone()).unwrap()),
                _ => None,
            };
            let (out, alpha) = hetgfl::aggregate(
                &mut tape, h, messages, &layer, mode, beta, alpha_prev, rel.lin, &graph, slope,
            )
            .unwrap();

            let (naive_out, naive_alpha) =
                naive_layer(&graph, &h_vals, &p, mode, beta, Some(&prev), slope);
            for (a, b) in tape.values(out).iter().zip(&naive_out) {
                assert!((a - b).abs() <= 1e-12, "{mode:?} trial {trial}: {a} vs {b}");
            }
            if let Some(alpha) = alpha {
                for (a, b) in tape.values(alpha).iter().zip(&naive_alpha) {
                    assert!((a - b).abs() <= 1e-12, "{mode:?} alpha: {a} vs {b}");
                }
            }
            if isolate {
                // isolated node keeps act(h_i): empty sum plus residual
                for j in 0..d {
                    let expect = leaky(h_vals[j], slope);
                    let got = tape.values(out)[j];
                    assert!((got - expect).abs() <= 1e-12);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------
// Attention-blend endpoints are exact.
// ---------------------------------------------------------------------

#[test]
fn beta_endpoints_are_bitwise_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 8;
    let d = 4;
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i, rng.gen_range(0..3)));
    }
    let graph = HeteroGraph::from_parts(GraphParts {
        node_type: vec![0; n],
        features: vec![None; n],
        edges,
        labels: vec![(0, vec![0])],
        split: None,
    })
    .unwrap();
    let m = graph.arcs().n_arcs();

    let mut tape = Tape::new();
    let h = tape
        .leaf(&[n, d], (0..n * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let table = tape
        .leaf(&[3, 2], (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let w_rel = tape
        .leaf(&[2, d], (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let w = tape
        .leaf(&[d, d], (0..d * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let attn = tape
        .leaf(&[3 * d, 1], (0..3 * d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .unwrap();
    let prev = tape
        .leaf(&[m, 1], (0..m).map(|_| rng.gen_range(0.0..1.0)).collect())
        .unwrap();
    let layer = hetgfl::params::BoundLayer {
        w_rel,
        w,
        w_res: None,
        attn: Some(attn),
    };

    let run = |tape: &mut Tape, mode: AggMode, beta: f64, with_prev: bool| {
        let rel = hetgfl::edge_relation_map(tape, table, w_rel, 0.01).unwrap();
        let messages = hetgfl::propagate(tape, h, Some(rel.act), &graph).unwrap();
        let (_, alpha) = hetgfl::aggregate(
            tape,
            h,
            messages,
            &layer,
            mode,
            beta,
            with_prev.then_some(prev),
            rel.lin,
            &graph,
            0.01,
        )
        .unwrap();
        alpha.unwrap()
    };

    let alpha_hat = run(&mut tape, AggMode::NodeResidual, 0.0, false);
    let alpha_b0 = run(&mut tape, AggMode::EdgeResidual, 0.0, true);
    let alpha_b1 = run(&mut tape, AggMode::EdgeResidual, 1.0, true);

    assert_eq!(tape.values(alpha_b0), tape.values(alpha_hat), "beta = 0");
    assert_eq!(tape.values(alpha_b1), tape.values(prev), "beta = 1");
}

// ---------------------------------------------------------------------
// Structural invariances of the full forward pass.
// ---------------------------------------------------------------------

#[test]
fn edge_order_permutation_leaves_outputs_unchanged() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let g1 = hetgfl::synth_planted(50, 2, 3, 2, 0.9, 8).unwrap();
    let mut shuffled: Vec<(usize, usize, usize)> = g1.edges().to_vec();
    shuffled.shuffle(&mut rng);
    let g2 = HeteroGraph::from_parts(GraphParts {
        node_type: g1.node_type().to_vec(),
        features: vec![None; g1.n_nodes()],
        edges: shuffled,
        labels: (0..g1.n_nodes())
            .map(|i| (i, g1.labels()[i].clone()))
            .collect(),
        split: None,
    })
    .unwrap();

    let cfg = ModelConfig {
        edge_dim: 4,
        ..ModelConfig::uniform(2, 8)
    };
    let params = ModelParams::init(&GraphMeta::of(&g1), &cfg).unwrap();
    let eval = |g: &HeteroGraph| {
        let mut tape = Tape::new();
        let pass = forward(&mut tape, g, &params, &cfg).unwrap();
        tape.values(pass.probs).to_vec()
    };
    for (a, b) in eval(&g1).iter().zip(eval(&g2)) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
}

#[test]
fn loss_invariant_under_node_relabeling() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = hetgfl::synth_planted(40, 2, 3, 2, 0.9, 3).unwrap();
    let n = g.n_nodes();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);

    let mask: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
    let permuted = HeteroGraph::from_parts(GraphParts {
        node_type: {
            let mut v = vec![0; n];
            for i in 0..n {
                v[perm[i]] = g.node_type()[i];
            }
            v
        },
        features: vec![None; n],
        edges: g
            .edges()
            .iter()
            .map(|&(u, v, t)| (perm[u], perm[v], t))
            .collect(),
        labels: (0..n).map(|i| (perm[i], g.labels()[i].clone())).collect(),
        split: None,
    })
    .unwrap();
    let mask_p = {
        let mut v = vec![false; n];
        for i in 0..n {
            v[perm[i]] = mask[i];
        }
        v
    };

    let cfg = ModelConfig {
        edge_dim: 4,
        ..ModelConfig::uniform(2, 8)
    };
    let params = ModelParams::init(&GraphMeta::of(&g), &cfg).unwrap();
    let eval = |g: &HeteroGraph, mask: &[bool]| {
        let mut tape = Tape::new();
        let pass = forward(&mut tape, g, &params, &cfg).unwrap();
        let l = loss(&mut tape, &pass, g, mask, &params, &cfg, true).unwrap();
        tape.scalar(l).unwrap()
    };
    let (a, b) = (eval(&g, &mask), eval(&permuted, &mask_p));
    assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
}

#[test]
fn convergence_within_sixty_epochs_on_desk_fixtures() {
    use hetgfl::graph::{make_split, SplitSpec};
    use hetgfl::train::{train, TrainConfig};
    for (n, classes, seed) in [(200usize, 3usize, 1u64), (150, 2, 2)] {
        let mut g = hetgfl::synth_planted(n, 2, 4, classes, 0.9, seed).unwrap();
        let masks = make_split(&g, &SplitSpec::new(0.24, 0.06, 0.70, seed).unwrap()).unwrap();
        g.set_masks(masks).unwrap();
        let cfg = ModelConfig {
            edge_dim: 32,
            ..ModelConfig::uniform(2, 32)
        };
        let tcfg = TrainConfig {
            lr: 0.01,
            max_epochs: 200,
            patience: 30,
            ..TrainConfig::default()
        };
        let (_, hist) = train(&g, &cfg, &tcfg).unwrap();
        let best = &hist.epochs[hist.best_epoch];
        assert!(
            best.epoch <= 60,
            "fixture (n={n}, c={classes}) best epoch {}",
            best.epoch
        );
        assert!(best.val_micro_f1 >= 0.9, "val micro-F1 {}", best.val_micro_f1);
    }
}

#[test]
fn model_forward_hand_check_against_naive_stack() {
    // two stacked layers through the public forward must equal stacking
    // the naive oracle on top of a naive projection
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 7;
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.gen_range(0..i), i, rng.gen_range(0..2)));
    }
    let graph = HeteroGraph::from_parts(GraphParts {
        node_type: vec![0; n],
        features: (0..n)
            .map(|_| Some((0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect(),
        edges,
        labels: (0..n).map(|i| (i, vec![i % 2])).collect(),
        split: None,
    })
    .unwrap();
    let cfg = ModelConfig {
        n_layers: 2,
        dims: vec![4, 4, 4],
        edge_dim: 3,
        agg: AggMode::NodeResidual,
        weight_decay: 0.0,
        seed: 21,
        ..ModelConfig::default()
    };
    let params = ModelParams::init(&GraphMeta::of(&graph), &cfg).unwrap();

    let mut tape = Tape::new();
    let pass = forward(&mut tape, &graph, &params, &cfg).unwrap();

    // naive recomputation
    let slope = cfg.leaky_slope;
    let d = 4;
    let tf = &graph.features()[0];
    let mut h = vec![0.0; n * d];
    for (row, &i) in tf.nodes.iter().enumerate() {
        let x = matvec(
            &params.node_proj[0].w.values,
            3,
            d,
            &tf.data[row * 3..(row + 1) * 3],
        );
        for j in 0..d {
            h[i * d + j] = leaky(x[j] + params.node_proj[0].b.values[j], slope);
        }
    }
    for l in 0..2 {
        let p = NaiveParams {
            table: params.edge_table.weights.values.clone(),
            w_rel: params.layers[l].w_rel.values.clone(),
            w: params.layers[l].w.values.clone(),
            attn: params.layers[l].attn.as_ref().unwrap().values.clone(),
            edge_dim: 3,
            d,
        };
        let (next, _) = naive_layer(&graph, &h, &p, AggMode::NodeResidual, 0.0, None, slope);
        h = next;
    }
    let probs = tape.values(pass.probs);
    let c = graph.n_classes();
    for i in 0..n {
        let norm = h[i * d..(i + 1) * d]
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        let o: Vec<f64> = h[i * d..(i + 1) * d].iter().map(|x| x / norm).collect();
        let logits = matvec(&params.classifier.values, d, c, &o);
        let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|x| (x - mx).exp()).collect();
        let s: f64 = exps.iter().sum();
        for (j, e) in exps.iter().enumerate() {
            let want = e / s;
            let got = probs[i * c + j];
            assert!((got - want).abs() <= 1e-12, "node {i} class {j}: {got} vs {want}");
        }
    }
}
