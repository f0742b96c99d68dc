//! Heterogeneous graph data model: typed nodes and edges, per-type feature
//! matrices, labels, split masks, and the arc index used by propagation.
//!
//! Edges are undirected: each stored edge `(u, v, t)` expands into the two
//! directed arcs `u -> v` and `v -> u` sharing the edge-type id `t`
//! (self-loops expand to a single arc). Arcs are grouped by destination so
//! neighborhood reductions are contiguous segment operations. A graph is
//! immutable after construction and safe to share across threads.

mod io;
mod synth;

pub use io::{load_dataset, load_split, save_dataset, save_split};
pub use synth::synth_planted;

use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Which split a labeled node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Split fractions plus the shuffle seed.
#[derive(Debug, Clone, Copy)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            train_frac,
            val_frac,
            test_frac,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.train_frac + self.val_frac + self.test_frac;
        if self.train_frac <= 0.0 || self.val_frac <= 0.0 || self.test_frac <= 0.0 {
            return Err(Error::Split("all fractions must be positive".into()));
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Feature matrix for one node type.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeFeatures {
    /// Node ids of this type, ascending; rows of `data` align with this list.
    pub nodes: Vec<usize>,
    pub dim: usize,
    /// Row-major `nodes.len() x dim`.
    pub data: Vec<f64>,
    /// False when features were defaulted to a one-hot of the node type.
    pub explicit: bool,
}

/// Directed arcs grouped by destination (CSR over targets).
#[derive(Debug, Clone, PartialEq)]
pub struct ArcIndex {
    pub src: Rc<Vec<usize>>,
    pub dst: Rc<Vec<usize>>,
    pub etype: Rc<Vec<usize>>,
    /// Length `n + 1`; arcs targeting node `i` occupy `offsets[i]..offsets[i+1]`.
    pub offsets: Rc<Vec<usize>>,
}

impl ArcIndex {
    pub fn n_arcs(&self) -> usize {
        self.src.len()
    }

    /// In-degree of `i` (equals undirected degree; self-loops count once).
    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

/// Raw ingredients for a graph, as parsed from disk or built by a generator.
#[derive(Debug, Clone, Default)]
pub struct GraphParts {
    pub node_type: Vec<usize>,
    /// Per node; `None` means the node type has no explicit features.
    pub features: Vec<Option<Vec<f64>>>,
    /// Undirected edges `(u, v, edge_type)` in input order.
    pub edges: Vec<(usize, usize, usize)>,
    /// `(node, class ids)`; absent nodes are unlabeled.
    pub labels: Vec<(usize, Vec<usize>)>,
    pub split: Option<Vec<(usize, Split)>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SplitMasks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl SplitMasks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn is_unset(&self) -> bool {
        !self.train.iter().chain(&self.val).chain(&self.test).any(|&b| b)
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |v: &[bool]| v.iter().filter(|&&b| b).count();
        (c(&self.train), c(&self.val), c(&self.test))
    }
}

/// Immutable heterogeneous graph.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    n: usize,
    node_type: Vec<usize>,
    n_node_types: usize,
    features: Vec<TypeFeatures>,
    edges: Vec<(usize, usize, usize)>,
    n_edge_types: usize,
    labels: Vec<Vec<usize>>,
    n_classes: usize,
    masks: SplitMasks,
    arcs: ArcIndex,
}

impl HeteroGraph {
    /// Validates the parts and builds the derived arc index and feature
    /// matrices. Featureless node types get a one-hot of the type id.
    pub fn from_parts(parts: GraphParts) -> Result<Self> {
        let n = parts.node_type.len();
        if n == 0 {
            return Err(Error::Graph("graph has no nodes".into()));
        }
        if parts.features.len() != n {
            return Err(Error::Graph(format!(
                "feature list has {} entries for {} nodes",
                parts.features.len(),
                n
            )));
        }
        let n_node_types = parts.node_type.iter().max().unwrap() + 1;

        for &(u, v, _) in &parts.edges {
            if u >= n || v >= n {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
        }
        let n_edge_types = parts
            .edges
            .iter()
            .map(|&(_, _, t)| t + 1)
            .max()
            .unwrap_or(0);

        // Per-type feature matrices; explicit features must agree in dim
        // across the whole type.
        let mut features = Vec::with_capacity(n_node_types);
        for t in 0..n_node_types {
            let nodes: Vec<usize> = (0..n).filter(|&i| parts.node_type[i] == t).collect();
            let dims: Vec<Option<usize>> = nodes
                .iter()
                .map(|&i| parts.features[i].as_ref().map(|f| f.len()))
                .collect();
            let explicit = dims.iter().any(|d| d.is_some());
            let (dim, data) = if explicit {
                let dim = match dims[0] {
                    Some(d) => d,
                    None => {
                        return Err(Error::Graph(format!(
                            "node type {t}: some nodes have features, some do not"
                        )))
                    }
                };
                let mut data = Vec::with_capacity(nodes.len() * dim);
                for (&i, d) in nodes.iter().zip(&dims) {
                    if *d != Some(dim) {
                        return Err(Error::Graph(format!(
                            "node type {t}: node {i} has feature dim {:?}, expected {dim}",
                            d
                        )));
                    }
                    data.extend_from_slice(parts.features[i].as_ref().unwrap());
                }
                (dim, data)
            } else {
                // one-hot of the node type
                let dim = n_node_types;
                let mut data = vec![0.0; nodes.len() * dim];
                for r in 0..nodes.len() {
                    data[r * dim + t] = 1.0;
                }
                (dim, data)
            };
            features.push(TypeFeatures {
                nodes,
                dim,
                data,
                explicit,
            });
        }

        let mut labels = vec![Vec::new(); n];
        let mut n_classes = 0;
        for (i, classes) in &parts.labels {
            if *i >= n {
                return Err(Error::Graph(format!("label references node {i} of {n}")));
            }
            if classes.is_empty() {
                return Err(Error::Graph(format!("node {i} has an empty label list")));
            }
            if !labels[*i].is_empty() {
                return Err(Error::Graph(format!("node {i} labeled twice")));
            }
            let mut cs = classes.clone();
            cs.sort_unstable();
            cs.dedup();
            n_classes = n_classes.max(cs.last().unwrap() + 1);
            labels[*i] = cs;
        }

        let arcs = build_arcs(n, &parts.edges);

        let mut graph = Self {
            n,
            node_type: parts.node_type,
            n_node_types,
            features,
            edges: parts.edges,
            n_edge_types,
            labels,
            n_classes,
            masks: SplitMasks::empty(n),
            arcs,
        };

        if let Some(split) = parts.split {
            let mut masks = SplitMasks::empty(n);
            for (i, s) in split {
                if i >= n {
                    return Err(Error::Split(format!("split references node {i} of {n}")));
                }
                match s {
                    Split::Train => masks.train[i] = true,
                    Split::Val => masks.val[i] = true,
                    Split::Test => masks.test[i] = true,
                }
            }
            graph.set_masks(masks)?;
        }
        Ok(graph)
    }

    /// Installs masks, enforcing that they are disjoint and exactly cover
    /// the labeled nodes.
    pub fn set_masks(&mut self, masks: SplitMasks) -> Result<()> {
        if masks.train.len() != self.n || masks.val.len() != self.n || masks.test.len() != self.n {
            return Err(Error::Split("mask length differs from node count".into()));
        }
        for i in 0..self.n {
            let hits = masks.train[i] as u8 + masks.val[i] as u8 + masks.test[i] as u8;
            if hits > 1 {
                return Err(Error::Split(format!("node {i} appears in two masks")));
            }
            let labeled = !self.labels[i].is_empty();
            if hits == 1 && !labeled {
                return Err(Error::Split(format!("node {i} is split but unlabeled")));
            }
            if hits == 0 && labeled {
                return Err(Error::Split(format!("labeled node {i} missing from split")));
            }
        }
        self.masks = masks;
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_node_types(&self) -> usize {
        self.n_node_types
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_edge_types(&self) -> usize {
        self.n_edge_types
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn node_type(&self) -> &[usize] {
        &self.node_type
    }

    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &[TypeFeatures] {
        &self.features
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn masks(&self) -> &SplitMasks {
        &self.masks
    }

    pub fn arcs(&self) -> &ArcIndex {
        &self.arcs
    }

    /// Neighbor ids of `i` (sources of arcs targeting `i`).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        let (lo, hi) = (self.arcs.offsets[i], self.arcs.offsets[i + 1]);
        &self.arcs.src[lo..hi]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.arcs.degree(i)
    }

    /// Symmetric normalization factor `1 / sqrt(|N_i| * |N_j|)`.
    pub fn gcn_norm(&self, i: usize, j: usize) -> Result<f64> {
        let di = self.degree(i);
        let dj = self.degree(j);
        if di == 0 {
            return Err(Error::DegreeZero { node: i });
        }
        if dj == 0 {
            return Err(Error::DegreeZero { node: j });
        }
        Ok(1.0 / ((di * dj) as f64).sqrt())
    }

    /// Dense `n x c` label indicator matrix.
    pub fn label_matrix(&self) -> Vec<f64> {
        let c = self.n_classes;
        let mut y = vec![0.0; self.n * c];
        for (i, ls) in self.labels.iter().enumerate() {
            for &l in ls {
                y[i * c + l] = 1.0;
            }
        }
        y
    }

    /// True when every labeled node carries exactly one class.
    pub fn is_single_label(&self) -> bool {
        self.labels.iter().all(|ls| ls.len() <= 1)
    }

    pub fn mask_of(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.masks.train,
            Split::Val => &self.masks.val,
            Split::Test => &self.masks.test,
        }
    }
}

fn build_arcs(n: usize, edges: &[(usize, usize, usize)]) -> ArcIndex {
    // (dst, input order) keys keep construction deterministic
    let mut triples: Vec<(usize, usize, usize)> = Vec::with_capacity(edges.len() * 2);
    for &(u, v, t) in edges {
        triples.push((v, u, t)); // u -> v
        if u != v {
            triples.push((u, v, t)); // v -> u
        }
    }
    triples.sort_by_key(|&(dst, _, _)| dst);

    let mut offsets = vec![0usize; n + 1];
    for &(dst, _, _) in &triples {
        offsets[dst + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let src: Vec<usize> = triples.iter().map(|&(_, s, _)| s).collect();
    let dst: Vec<usize> = triples.iter().map(|&(d, _, _)| d).collect();
    let etype: Vec<usize> = triples.iter().map(|&(_, _, t)| t).collect();
    ArcIndex {
        src: Rc::new(src),
        dst: Rc::new(dst),
        etype: Rc::new(etype),
        offsets: Rc::new(offsets),
    }
}

/// Stratified random split of the labeled nodes.
///
/// Nodes group by primary class (the lowest class id for multi-label rows).
/// Within each class the rounding rule is: floor for train and val,
/// remainder to test. Errors when a class cannot fill the train or val
/// split.
pub fn make_split(graph: &HeteroGraph, spec: &SplitSpec) -> Result<SplitMasks> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); graph.n_classes()];
    for (i, ls) in graph.labels().iter().enumerate() {
        if let Some(&c) = ls.first() {
            by_class[c].push(i);
        }
    }
    let mut masks = SplitMasks::empty(graph.n_nodes());
    for (c, nodes) in by_class.iter_mut().enumerate() {
        if nodes.is_empty() {
            return Err(Error::Stratification { class: c, count: 0 });
        }
        nodes.shuffle(&mut rng);
        let n_c = nodes.len();
        let n_train = (spec.train_frac * n_c as f64).floor() as usize;
        let n_val = (spec.val_frac * n_c as f64).floor() as usize;
        if n_train == 0 || n_val == 0 {
            return Err(Error::Stratification {
                class: c,
                count: n_c,
            });
        }
        for (pos, &i) in nodes.iter().enumerate() {
            if pos < n_train {
                masks.train[i] = true;
            } else if pos < n_train + n_val {
                masks.val[i] = true;
            } else {
                masks.test[i] = true;
            }
        }
    }
    Ok(masks)
}
