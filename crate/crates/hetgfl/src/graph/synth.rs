//! Planted-partition generator for desk-scale fixtures.
//!
//! Nodes get balanced class assignments; edges prefer same-class endpoints,
//! and intra-class edges carry that class's designated edge type with
//! probability `homophily`. Node features stay class-blind (the one-hot
//! node-type default), so the class signal lives in edge types and topology
//! only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphParts, HeteroGraph};
use crate::error::{Error, Result};

/// Fraction of random edges drawn inside a class.
const INTRA_P: f64 = 0.75;
/// Undirected edges per node.
const EDGES_PER_NODE: usize = 4;

pub fn synth_planted(
    n: usize,
    n_node_types: usize,
    n_edge_types: usize,
    n_classes: usize,
    homophily: f64,
    seed: u64,
) -> Result<HeteroGraph> {
    if n_classes == 0 || n < n_classes {
        return Err(Error::Synth(format!(
            "need n >= n_classes >= 1, got n={n}, n_classes={n_classes}"
        )));
    }
    if n_node_types == 0 || n_edge_types == 0 {
        return Err(Error::Synth("need at least one node and edge type".into()));
    }
    if !(homophily > 0.0 && homophily <= 1.0) {
        return Err(Error::Synth(format!("homophily {homophily} outside (0, 1]")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut class: Vec<usize> = (0..n).map(|i| i % n_classes).collect();
    class.shuffle(&mut rng);
    let node_type: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n_node_types)).collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in class.iter().enumerate() {
        members[c].push(i);
    }

    let class_type = |c: usize| c % n_edge_types;
    let pick_type = |intra_class: Option<usize>, rng: &mut ChaCha8Rng| -> usize {
        match intra_class {
            Some(c) if rng.gen::<f64>() < homophily => class_type(c),
            _ => rng.gen_range(0..n_edge_types),
        }
    };

    let mut edges: Vec<(usize, usize, usize)> = Vec::with_capacity(n * EDGES_PER_NODE);

    // ring per class so no node stays isolated
    for (c, m) in members.iter().enumerate() {
        match m.len() {
            1 => {
                // lone member: tie it to some node of another class
                let u = m[0];
                let v = loop {
                    let v = rng.gen_range(0..n);
                    if class[v] != c {
                        break v;
                    }
                };
                let t = pick_type(None, &mut rng);
                edges.push((u, v, t));
            }
            2 => {
                let t = pick_type(Some(c), &mut rng);
                edges.push((m[0], m[1], t));
            }
            len => {
                for i in 0..len {
                    let t = pick_type(Some(c), &mut rng);
                    edges.push((m[i], m[(i + 1) % len], t));
                }
            }
        }
    }

    // random edges up to the target count
    while edges.len() < n * EDGES_PER_NODE {
        let u = rng.gen_range(0..n);
        let c = class[u];
        let intra = members[c].len() > 1 && rng.gen::<f64>() < INTRA_P;
        let v = loop {
            let v = if intra {
                members[c][rng.gen_range(0..members[c].len())]
            } else {
                rng.gen_range(0..n)
            };
            if v != u && (intra || class[v] != c) {
                break v;
            }
        };
        let t = pick_type(if intra { Some(c) } else { None }, &mut rng);
        edges.push((u, v, t));
    }

    let labels = (0..n).map(|i| (i, vec![class[i]])).collect();
    HeteroGraph::from_parts(GraphParts {
        node_type,
        features: vec![None; n],
        edges,
        labels,
        split: None,
    })
}
