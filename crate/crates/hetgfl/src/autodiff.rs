//! Reverse-mode automatic differentiation over dense f64 tensors.
//!
//! A [`Tape`] owns every tensor created during one forward pass: shapes,
//! value buffers and gradient buffers live in parallel arenas indexed by
//! [`TensorId`]. Operations record themselves eagerly (define-by-run) and
//! [`Tape::backward`] replays the records once, in reverse, accumulating
//! gradients with `+=`. Inputs always precede their outputs on the tape,
//! so the record list is already in topological order.
//!
//! Gradient accumulation runs in a fixed order (graph ops scatter
//! sequentially, dense ops partition by output row), so repeated
//! `zero_grad` + `backward` passes are bit-for-bit reproducible.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::kernels;

/// Handle to a tensor stored on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

enum Op {
    Leaf,
    Add { a: usize, b: usize },
    AddRow { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Hadamard { a: usize, b: usize },
    HadamardRow { a: usize, b: usize },
    MulCol { a: usize, s: usize },
    Matmul { a: usize, b: usize, m: usize, k: usize, n: usize },
    LeakyRelu { a: usize, slope: f64 },
    Sigmoid { a: usize },
    SoftmaxRows { a: usize, cols: usize },
    L2NormalizeRows { a: usize, cols: usize },
    LogClamped { a: usize, floor: f64 },
    Scale { a: usize, c: f64 },
    SqrtElem { a: usize },
    SumAll { a: usize },
    SumSq { a: usize },
    GatherRows { a: usize, idx: Rc<Vec<usize>>, d: usize },
    ScatterRows { a: usize, idx: Rc<Vec<usize>>, d: usize },
    SegmentSum { a: usize, offsets: Rc<Vec<usize>>, d: usize },
    SegmentSoftmax { a: usize, offsets: Rc<Vec<usize>> },
}

struct Record {
    op: Op,
    out: usize,
}

/// Arena of tensors plus the operation records connecting them.
#[derive(Default)]
pub struct Tape {
    shapes: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
    records: Vec<Record>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Interprets `shape` as a matrix: `[r, c]` directly, `[n]` as a single row.
fn as_matrix(shape: &[usize]) -> Option<(usize, usize)> {
    match shape {
        [r, c] => Some((*r, *c)),
        [n] => Some((1, *n)),
        _ => None,
    }
}

fn is_row_broadcast(a: &[usize], b: &[usize]) -> bool {
    match (as_matrix(a), as_matrix(b)) {
        (Some((ar, ac)), Some((br, bc))) => ar > 1 && br == 1 && ac == bc,
        _ => false,
    }
}

fn is_col_vector(a: &[usize], s: &[usize]) -> bool {
    match (as_matrix(a), s) {
        (Some((ar, _)), [n]) => *n == ar,
        (Some((ar, _)), [n, 1]) => *n == ar,
        _ => false,
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, op: Op) -> TensorId {
        debug_assert_eq!(numel(&shape), values.len());
        let id = self.shapes.len();
        self.grads.push(vec![0.0; values.len()]);
        self.shapes.push(shape);
        self.values.push(values);
        self.records.push(Record { op, out: id });
        TensorId(id)
    }

    /// Registers a leaf tensor (input or parameter). Gradient starts at zero.
    pub fn leaf(&mut self, shape: &[usize], values: Vec<f64>) -> Result<TensorId> {
        if numel(shape) != values.len() {
            return Err(Error::ShapeMismatch {
                op: "leaf",
                lhs: shape.to_vec(),
                rhs: vec![values.len()],
            });
        }
        Ok(self.push(shape.to_vec(), values, Op::Leaf))
    }

    pub fn scalar_leaf(&mut self, v: f64) -> TensorId {
        self.push(vec![1], vec![v], Op::Leaf)
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.shapes[id.0]
    }

    pub fn values(&self, id: TensorId) -> &[f64] {
        &self.values[id.0]
    }

    pub fn grad(&self, id: TensorId) -> &[f64] {
        &self.grads[id.0]
    }

    /// Value of a single-element tensor.
    pub fn scalar(&self, id: TensorId) -> Result<f64> {
        if self.values[id.0].len() != 1 {
            return Err(Error::NotScalar {
                shape: self.shapes[id.0].clone(),
            });
        }
        Ok(self.values[id.0][0])
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    fn shapes2(&self, op: &'static str, a: TensorId, b: TensorId) -> Error {
        Error::ShapeMismatch {
            op,
            lhs: self.shapes[a.0].clone(),
            rhs: self.shapes[b.0].clone(),
        }
    }

    /// Elementwise sum; `b` may also be a single row broadcast over `a`'s rows.
    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (&self.shapes[a.0], &self.shapes[b.0]);
        if sa == sb {
            let vals: Vec<f64> = self.values[a.0]
                .iter()
                .zip(&self.values[b.0])
                .map(|(x, y)| x + y)
                .collect();
            Ok(self.push(sa.clone(), vals, Op::Add { a: a.0, b: b.0 }))
        } else if is_row_broadcast(sa, sb) {
            let d = self.values[b.0].len();
            let vals: Vec<f64> = self.values[a.0]
                .iter()
                .enumerate()
                .map(|(i, x)| x + self.values[b.0][i % d])
                .collect();
            Ok(self.push(sa.clone(), vals, Op::AddRow { a: a.0, b: b.0 }))
        } else {
            Err(self.shapes2("add", a, b))
        }
    }

    /// Elementwise difference, same shapes only.
    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        if self.shapes[a.0] != self.shapes[b.0] {
            return Err(self.shapes2("sub", a, b));
        }
        let vals: Vec<f64> = self.values[a.0]
            .iter()
            .zip(&self.values[b.0])
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::Sub { a: a.0, b: b.0 }))
    }

    /// Elementwise product; `b` may also be a single row broadcast over `a`'s rows.
    pub fn hadamard(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (&self.shapes[a.0], &self.shapes[b.0]);
        if sa == sb {
            let mut vals = vec![0.0; self.values[a.0].len()];
            kernels::mul(&mut vals, &self.values[a.0], &self.values[b.0]);
            Ok(self.push(sa.clone(), vals, Op::Hadamard { a: a.0, b: b.0 }))
        } else if is_row_broadcast(sa, sb) {
            let d = self.values[b.0].len();
            let vals: Vec<f64> = self.values[a.0]
                .iter()
                .enumerate()
                .map(|(i, x)| x * self.values[b.0][i % d])
                .collect();
            Ok(self.push(sa.clone(), vals, Op::HadamardRow { a: a.0, b: b.0 }))
        } else {
            Err(self.shapes2("hadamard", a, b))
        }
    }

    /// Scales each row of `a` by the matching entry of column vector `s`.
    pub fn mul_col(&mut self, a: TensorId, s: TensorId) -> Result<TensorId> {
        if !is_col_vector(&self.shapes[a.0], &self.shapes[s.0]) {
            return Err(self.shapes2("mul_col", a, s));
        }
        let (rows, d) = as_matrix(&self.shapes[a.0]).unwrap();
        let mut vals = vec![0.0; rows * d];
        for i in 0..rows {
            let sv = self.values[s.0][i];
            for j in 0..d {
                vals[i * d + j] = self.values[a.0][i * d + j] * sv;
            }
        }
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::MulCol { a: a.0, s: s.0 }))
    }

    /// Matrix product of `a: m×k` and `b: k×n`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (sa, sb) = (&self.shapes[a.0], &self.shapes[b.0]);
        let ((m, k), (k2, n)) = match (as_matrix(sa), as_matrix(sb)) {
            (Some(x), Some(y)) if sa.len() == 2 && sb.len() == 2 => (x, y),
            _ => return Err(self.shapes2("matmul", a, b)),
        };
        if k != k2 {
            return Err(self.shapes2("matmul", a, b));
        }
        let mut vals = vec![0.0; m * n];
        kernels::matmul(&mut vals, &self.values[a.0], &self.values[b.0], m, k, n);
        Ok(self.push(
            vec![m, n],
            vals,
            Op::Matmul { a: a.0, b: b.0, m, k, n },
        ))
    }

    /// `x.max(0) + slope * x.min(0)` elementwise; the gate at zero is 1.
    pub fn leaky_relu(&mut self, a: TensorId, slope: f64) -> Result<TensorId> {
        debug_assert!(slope > 0.0 && slope < 1.0);
        let vals: Vec<f64> = self.values[a.0]
            .iter()
            .map(|&x| if x >= 0.0 { x } else { slope * x })
            .collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::LeakyRelu { a: a.0, slope }))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> Result<TensorId> {
        let vals: Vec<f64> = self.values[a.0]
            .iter()
            .map(|&x| 1.0 / (1.0 + (-x).exp()))
            .collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::Sigmoid { a: a.0 }))
    }

    /// Row-wise softmax, stabilized by subtracting each row's maximum.
    pub fn softmax_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let (rows, cols) = match self.shapes[a.0].as_slice() {
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "softmax_rows",
                    lhs: other.to_vec(),
                    rhs: vec![],
                })
            }
        };
        let mut vals = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = &self.values[a.0][i * cols..(i + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &x) in row.iter().enumerate() {
                let e = (x - max).exp();
                vals[i * cols + j] = e;
                sum += e;
            }
            for v in &mut vals[i * cols..(i + 1) * cols] {
                *v /= sum;
            }
        }
        Ok(self.push(vec![rows, cols], vals, Op::SoftmaxRows { a: a.0, cols }))
    }

    /// Scales each row of `a` to unit Euclidean norm.
    pub fn l2_normalize_rows(&mut self, a: TensorId) -> Result<TensorId> {
        let (rows, cols) = match self.shapes[a.0].as_slice() {
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "l2_normalize_rows",
                    lhs: other.to_vec(),
                    rhs: vec![],
                })
            }
        };
        let mut vals = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = &self.values[a.0][i * cols..(i + 1) * cols];
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                return Err(Error::DegenerateRow { row: i });
            }
            for (j, &x) in row.iter().enumerate() {
                vals[i * cols + j] = x / norm;
            }
        }
        Ok(self.push(
            vec![rows, cols],
            vals,
            Op::L2NormalizeRows { a: a.0, cols },
        ))
    }

    /// `ln(max(x, floor))` elementwise; gradient is zero in the clamped region.
    pub fn log_clamped(&mut self, a: TensorId, floor: f64) -> Result<TensorId> {
        debug_assert!(floor > 0.0);
        let vals: Vec<f64> = self.values[a.0].iter().map(|&x| x.max(floor).ln()).collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::LogClamped { a: a.0, floor }))
    }

    /// Multiplication by a compile-time constant.
    pub fn scale(&mut self, a: TensorId, c: f64) -> Result<TensorId> {
        let vals: Vec<f64> = self.values[a.0].iter().map(|&x| c * x).collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::Scale { a: a.0, c }))
    }

    pub fn sqrt_elem(&mut self, a: TensorId) -> Result<TensorId> {
        let vals: Vec<f64> = self.values[a.0].iter().map(|&x| x.sqrt()).collect();
        Ok(self.push(self.shapes[a.0].clone(), vals, Op::SqrtElem { a: a.0 }))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        let s: f64 = self.values[a.0].iter().sum();
        Ok(self.push(vec![1], vec![s], Op::SumAll { a: a.0 }))
    }

    /// Sum of squared entries, as a `[1]` tensor.
    pub fn sum_sq(&mut self, a: TensorId) -> Result<TensorId> {
        let s: f64 = self.values[a.0].iter().map(|x| x * x).sum();
        Ok(self.push(vec![1], vec![s], Op::SumSq { a: a.0 }))
    }

    /// `out[r] = a[idx[r]]` over the rows of 2-D `a`.
    pub fn gather_rows(&mut self, a: TensorId, idx: Rc<Vec<usize>>) -> Result<TensorId> {
        let (rows, d) = match self.shapes[a.0].as_slice() {
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "gather_rows",
                    lhs: other.to_vec(),
                    rhs: vec![idx.len()],
                })
            }
        };
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(Error::Config(format!(
                "gather_rows: index {bad} out of range for {rows} rows"
            )));
        }
        let mut vals = vec![0.0; idx.len() * d];
        kernels::gather_rows(&mut vals, &self.values[a.0], &idx, d);
        Ok(self.push(vec![idx.len(), d], vals, Op::GatherRows { a: a.0, idx, d }))
    }

    /// Scatter-add of `a`'s rows into `n` output rows: `out[idx[r]] += a[r]`.
    pub fn scatter_rows(&mut self, a: TensorId, idx: Rc<Vec<usize>>, n: usize) -> Result<TensorId> {
        let (rows, d) = match self.shapes[a.0].as_slice() {
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "scatter_rows",
                    lhs: other.to_vec(),
                    rhs: vec![idx.len()],
                })
            }
        };
        if rows != idx.len() {
            return Err(Error::ShapeMismatch {
                op: "scatter_rows",
                lhs: self.shapes[a.0].clone(),
                rhs: vec![idx.len()],
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Config(format!(
                "scatter_rows: index {bad} out of range for {n} rows"
            )));
        }
        let mut vals = vec![0.0; n * d];
        kernels::scatter_add_rows(&mut vals, &self.values[a.0], &idx, d);
        Ok(self.push(vec![n, d], vals, Op::ScatterRows { a: a.0, idx, d }))
    }

    /// Sums contiguous row groups of `a`. `offsets` has one more entry than
    /// there are segments; empty segments yield zero rows.
    pub fn segment_sum(&mut self, a: TensorId, offsets: Rc<Vec<usize>>) -> Result<TensorId> {
        let (rows, d) = match self.shapes[a.0].as_slice() {
            [r, c] => (*r, *c),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "segment_sum",
                    lhs: other.to_vec(),
                    rhs: vec![],
                })
            }
        };
        check_offsets(&offsets, rows, "segment_sum")?;
        let n_seg = offsets.len() - 1;
        let mut vals = vec![0.0; n_seg * d];
        kernels::segment_sum(&mut vals, &self.values[a.0], &offsets, d);
        Ok(self.push(
            vec![n_seg, d],
            vals,
            Op::SegmentSum { a: a.0, offsets, d },
        ))
    }

    /// Softmax within contiguous groups of a column vector, stabilized per group.
    pub fn segment_softmax(&mut self, a: TensorId, offsets: Rc<Vec<usize>>) -> Result<TensorId> {
        let rows = match self.shapes[a.0].as_slice() {
            [r] => *r,
            [r, 1] => *r,
            other => {
                return Err(Error::ShapeMismatch {
                    op: "segment_softmax",
                    lhs: other.to_vec(),
                    rhs: vec![],
                })
            }
        };
        check_offsets(&offsets, rows, "segment_softmax")?;
        let x = &self.values[a.0];
        let mut vals = vec![0.0; rows];
        for s in 0..offsets.len() - 1 {
            let (lo, hi) = (offsets[s], offsets[s + 1]);
            if lo == hi {
                continue;
            }
            let max = x[lo..hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for r in lo..hi {
                let e = (x[r] - max).exp();
                vals[r] = e;
                sum += e;
            }
            for v in &mut vals[lo..hi] {
                *v /= sum;
            }
        }
        Ok(self.push(
            self.shapes[a.0].clone(),
            vals,
            Op::SegmentSoftmax { a: a.0, offsets },
        ))
    }

    /// Resets every gradient buffer to zero. Values are untouched.
    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Accumulates gradients of `loss` into every tensor on the tape.
    ///
    /// Each record is visited exactly once, in reverse order. Tensors the
    /// loss does not depend on keep zero gradients.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.values[loss.0].len() != 1 {
            return Err(Error::NotScalar {
                shape: self.shapes[loss.0].clone(),
            });
        }
        self.grads[loss.0][0] += 1.0;

        for ri in (0..self.records.len()).rev() {
            let out = self.records[ri].out;
            let gout = std::mem::take(&mut self.grads[out]);
            match &self.records[ri].op {
                Op::Leaf => {}
                Op::Add { a, b } => {
                    acc(&mut self.grads[*a], &gout);
                    acc(&mut self.grads[*b], &gout);
                }
                Op::AddRow { a, b } => {
                    acc(&mut self.grads[*a], &gout);
                    let d = self.grads[*b].len();
                    let gb = &mut self.grads[*b];
                    for (i, g) in gout.iter().enumerate() {
                        gb[i % d] += g;
                    }
                }
                Op::Sub { a, b } => {
                    acc(&mut self.grads[*a], &gout);
                    for (g, go) in self.grads[*b].iter_mut().zip(&gout) {
                        *g -= go;
                    }
                }
                Op::Hadamard { a, b } => {
                    {
                        let vb = &self.values[*b];
                        let ga = &mut self.grads[*a];
                        for ((g, go), v) in ga.iter_mut().zip(&gout).zip(vb) {
                            *g += go * v;
                        }
                    }
                    {
                        let va = &self.values[*a];
                        let gb = &mut self.grads[*b];
                        for ((g, go), v) in gb.iter_mut().zip(&gout).zip(va) {
                            *g += go * v;
                        }
                    }
                }
                Op::HadamardRow { a, b } => {
                    let d = self.values[*b].len();
                    {
                        let vb = &self.values[*b];
                        let ga = &mut self.grads[*a];
                        for (i, (g, go)) in ga.iter_mut().zip(&gout).enumerate() {
                            *g += go * vb[i % d];
                        }
                    }
                    {
                        let va = &self.values[*a];
                        let gb = &mut self.grads[*b];
                        for (i, go) in gout.iter().enumerate() {
                            gb[i % d] += go * va[i];
                        }
                    }
                }
                Op::MulCol { a, s } => {
                    let d = self.values[*a].len() / self.values[*s].len();
                    {
                        let vs = &self.values[*s];
                        let ga = &mut self.grads[*a];
                        for (i, (g, go)) in ga.iter_mut().zip(&gout).enumerate() {
                            *g += go * vs[i / d];
                        }
                    }
                    {
                        let va = &self.values[*a];
                        let gs = &mut self.grads[*s];
                        for (i, go) in gout.iter().enumerate() {
                            gs[i / d] += go * va[i];
                        }
                    }
                }
                Op::Matmul { a, b, m, k, n } => {
                    kernels::matmul_acc_nt(&mut self.grads[*a], &gout, &self.values[*b], *m, *k, *n);
                    kernels::matmul_acc_tn(&mut self.grads[*b], &self.values[*a], &gout, *m, *k, *n);
                }
                Op::LeakyRelu { a, slope } => {
                    let va = &self.values[*a];
                    let ga = &mut self.grads[*a];
                    for ((g, go), v) in ga.iter_mut().zip(&gout).zip(va) {
                        *g += go * if *v >= 0.0 { 1.0 } else { *slope };
                    }
                }
                Op::Sigmoid { a } => {
                    let y = &self.values[out];
                    let ga = &mut self.grads[*a];
                    for ((g, go), v) in ga.iter_mut().zip(&gout).zip(y) {
                        *g += go * v * (1.0 - v);
                    }
                }
                Op::SoftmaxRows { a, cols } => {
                    let y = &self.values[out];
                    let ga = &mut self.grads[*a];
                    let rows = y.len() / cols;
                    for i in 0..rows {
                        let yr = &y[i * cols..(i + 1) * cols];
                        let gr = &gout[i * cols..(i + 1) * cols];
                        let dot: f64 = yr.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..*cols {
                            ga[i * cols + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                }
                Op::L2NormalizeRows { a, cols } => {
                    let y = &self.values[out];
                    let va = &self.values[*a];
                    let ga = &mut self.grads[*a];
                    let rows = y.len() / cols;
                    for i in 0..rows {
                        let xr = &va[i * cols..(i + 1) * cols];
                        let yr = &y[i * cols..(i + 1) * cols];
                        let gr = &gout[i * cols..(i + 1) * cols];
                        let norm = xr.iter().map(|x| x * x).sum::<f64>().sqrt();
                        let dot: f64 = yr.iter().zip(gr).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..*cols {
                            ga[i * cols + j] += (gr[j] - yr[j] * dot) / norm;
                        }
                    }
                }
                Op::LogClamped { a, floor } => {
                    let va = &self.values[*a];
                    let ga = &mut self.grads[*a];
                    for ((g, go), v) in ga.iter_mut().zip(&gout).zip(va) {
                        if *v > *floor {
                            *g += go / v;
                        }
                    }
                }
                Op::Scale { a, c } => {
                    let ga = &mut self.grads[*a];
                    for (g, go) in ga.iter_mut().zip(&gout) {
                        *g += c * go;
                    }
                }
                Op::SqrtElem { a } => {
                    let y = &self.values[out];
                    let ga = &mut self.grads[*a];
                    for ((g, go), v) in ga.iter_mut().zip(&gout).zip(y) {
                        if *v > 0.0 {
                            *g += go / (2.0 * v);
                        }
                    }
                }
                Op::SumAll { a } => {
                    let g0 = gout[0];
                    for g in self.grads[*a].iter_mut() {
                        *g += g0;
                    }
                }
                Op::SumSq { a } => {
                    let g0 = gout[0];
                    let va = &self.values[*a];
                    let ga = &mut self.grads[*a];
                    for (g, v) in ga.iter_mut().zip(va) {
                        *g += 2.0 * v * g0;
                    }
                }
                Op::GatherRows { a, idx, d } => {
                    kernels::scatter_add_rows(&mut self.grads[*a], &gout, idx, *d);
                }
                Op::ScatterRows { a, idx, d } => {
                    let ga = &mut self.grads[*a];
                    for (r, &i) in idx.iter().enumerate() {
                        let src = &gout[i * d..(i + 1) * d];
                        for (g, s) in ga[r * d..(r + 1) * d].iter_mut().zip(src) {
                            *g += s;
                        }
                    }
                }
                Op::SegmentSum { a, offsets, d } => {
                    let ga = &mut self.grads[*a];
                    for s in 0..offsets.len() - 1 {
                        let gs = &gout[s * d..(s + 1) * d];
                        for r in offsets[s]..offsets[s + 1] {
                            for (g, go) in ga[r * d..(r + 1) * d].iter_mut().zip(gs) {
                                *g += go;
                            }
                        }
                    }
                }
                Op::SegmentSoftmax { a, offsets } => {
                    let y = &self.values[out];
                    let ga = &mut self.grads[*a];
                    for s in 0..offsets.len() - 1 {
                        let (lo, hi) = (offsets[s], offsets[s + 1]);
                        let dot: f64 = (lo..hi).map(|r| y[r] * gout[r]).sum();
                        for r in lo..hi {
                            ga[r] += y[r] * (gout[r] - dot);
                        }
                    }
                }
            }
            self.grads[out] = gout;
        }
        Ok(())
    }
}

fn acc(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn check_offsets(offsets: &[usize], rows: usize, op: &'static str) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&rows)
        && offsets.windows(2).all(|w| w[0] <= w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{op}: segment offsets must rise monotonically from 0 to {rows}"
        )))
    }
}
