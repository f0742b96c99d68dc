//! Classification and clustering metrics.
//!
//! F1 scores follow the standard pooled (micro) and per-class-averaged
//! (macro) definitions; the `*_paper_literal` variants expose the printed
//! `k·P·R / (k²·P + R)` form for inspection. Pair-counting metrics work on
//! cluster assignments and are invariant under relabeling.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class true-positive / false-positive / false-negative counts.
#[derive(Debug, Clone, Default)]
pub struct ConfusionTally {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
}

impl ConfusionTally {
    pub fn k(&self) -> usize {
        self.tp.len()
    }

    /// Tallies single-label multiclass predictions.
    pub fn from_single_label(truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.is_empty() || truth.len() != pred.len() {
            return Err(Error::Metric(format!(
                "need equal-length nonempty label arrays, got {} and {}",
                truth.len(),
                pred.len()
            )));
        }
        let k = truth.iter().chain(pred).max().unwrap() + 1;
        let mut t = Self {
            tp: vec![0; k],
            fp: vec![0; k],
            fn_: vec![0; k],
        };
        for (&y, &p) in truth.iter().zip(pred) {
            if y == p {
                t.tp[y] += 1;
            } else {
                t.fn_[y] += 1;
                t.fp[p] += 1;
            }
        }
        Ok(t)
    }

    /// Tallies multi-label indicator matrices (row-major `n x c`).
    pub fn from_indicator(truth: &[bool], pred: &[bool], c: usize) -> Result<Self> {
        if c == 0 || truth.is_empty() || truth.len() != pred.len() || truth.len() % c != 0 {
            return Err(Error::Metric(
                "indicator matrices must be equal-sized, nonempty, n x c".into(),
            ));
        }
        let mut t = Self {
            tp: vec![0; c],
            fp: vec![0; c],
            fn_: vec![0; c],
        };
        for (i, (&y, &p)) in truth.iter().zip(pred).enumerate() {
            let class = i % c;
            match (y, p) {
                (true, true) => t.tp[class] += 1,
                (false, true) => t.fp[class] += 1,
                (true, false) => t.fn_[class] += 1,
                (false, false) => {}
            }
        }
        Ok(t)
    }

    fn class_f1(&self, c: usize) -> f64 {
        let denom = 2 * self.tp[c] + self.fp[c] + self.fn_[c];
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp[c] as f64 / denom as f64
        }
    }

    fn class_precision(&self, c: usize) -> f64 {
        let denom = self.tp[c] + self.fp[c];
        if denom == 0 {
            0.0
        } else {
            self.tp[c] as f64 / denom as f64
        }
    }

    fn class_recall(&self, c: usize) -> f64 {
        let denom = self.tp[c] + self.fn_[c];
        if denom == 0 {
            0.0
        } else {
            self.tp[c] as f64 / denom as f64
        }
    }

    /// Micro F1 over globally pooled counts.
    pub fn micro_f1(&self) -> f64 {
        let tp: u64 = self.tp.iter().sum();
        let fp: u64 = self.fp.iter().sum();
        let fn_: u64 = self.fn_.iter().sum();
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    }

    /// Unweighted mean of per-class F1; classes absent from both sides
    /// contribute zero.
    pub fn macro_f1(&self) -> f64 {
        if self.k() == 0 {
            return 0.0;
        }
        (0..self.k()).map(|c| self.class_f1(c)).sum::<f64>() / self.k() as f64
    }

    /// Literal printed micro formula: `k·P_sum·R_sum / (k²·P_sum + R_sum)`.
    pub fn micro_f1_paper_literal(&self) -> f64 {
        let k = self.k() as f64;
        let p_sum: f64 = (0..self.k()).map(|c| self.class_precision(c)).sum();
        let r_sum: f64 = (0..self.k()).map(|c| self.class_recall(c)).sum();
        let denom = k * k * p_sum + r_sum;
        if denom == 0.0 {
            0.0
        } else {
            k * p_sum * r_sum / denom
        }
    }

    /// Literal printed macro formula: `k·P_ave·R_ave / (k²·P_ave + R_ave)`.
    pub fn macro_f1_paper_literal(&self) -> f64 {
        let k = self.k() as f64;
        if k == 0.0 {
            return 0.0;
        }
        let p_ave: f64 = (0..self.k()).map(|c| self.class_precision(c)).sum::<f64>() / k;
        let r_ave: f64 = (0..self.k()).map(|c| self.class_recall(c)).sum::<f64>() / k;
        let denom = k * k * p_ave + r_ave;
        if denom == 0.0 {
            0.0
        } else {
            k * p_ave * r_ave / denom
        }
    }
}

pub fn micro_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    Ok(ConfusionTally::from_single_label(truth, pred)?.micro_f1())
}

pub fn macro_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    Ok(ConfusionTally::from_single_label(truth, pred)?.macro_f1())
}

pub fn micro_f1_indicator(truth: &[bool], pred: &[bool], c: usize) -> Result<f64> {
    Ok(ConfusionTally::from_indicator(truth, pred, c)?.micro_f1())
}

pub fn macro_f1_indicator(truth: &[bool], pred: &[bool], c: usize) -> Result<f64> {
    Ok(ConfusionTally::from_indicator(truth, pred, c)?.macro_f1())
}

/// Ground-truth and predicted cluster assignments over the same samples.
#[derive(Debug, Clone, Copy)]
pub struct PartitionPair<'a> {
    pub truth: &'a [usize],
    pub pred: &'a [usize],
}

impl<'a> PartitionPair<'a> {
    pub fn new(truth: &'a [usize], pred: &'a [usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::Metric(format!(
                "partition lengths differ: {} vs {}",
                truth.len(),
                pred.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::Metric("empty partitions".into()));
        }
        Ok(Self { truth, pred })
    }

    fn n(&self) -> usize {
        self.truth.len()
    }

    /// True when the two assignments induce the same partition (bijective
    /// relabeling).
    pub fn equivalent(&self) -> bool {
        let mut fwd: HashMap<usize, usize> = HashMap::new();
        let mut bwd: HashMap<usize, usize> = HashMap::new();
        for (&t, &p) in self.truth.iter().zip(self.pred) {
            if *fwd.entry(t).or_insert(p) != p || *bwd.entry(p).or_insert(t) != t {
                return false;
            }
        }
        true
    }
}

struct Contingency {
    cells: HashMap<(usize, usize), u64>,
    row: HashMap<usize, u64>,
    col: HashMap<usize, u64>,
    n: u64,
}

impl Contingency {
    fn build(pair: &PartitionPair) -> Self {
        let mut cells = HashMap::new();
        let mut row = HashMap::new();
        let mut col = HashMap::new();
        for (&t, &p) in pair.truth.iter().zip(pair.pred) {
            *cells.entry((t, p)).or_insert(0u64) += 1;
            *row.entry(t).or_insert(0u64) += 1;
            *col.entry(p).or_insert(0u64) += 1;
        }
        Self {
            cells,
            row,
            col,
            n: pair.n() as u64,
        }
    }

    fn pair_sums(&self) -> (u64, u64, u64, u64) {
        let c2 = |x: u64| x * (x - 1) / 2;
        let s_cells: u64 = self.cells.values().map(|&v| c2(v)).sum();
        let s_row: u64 = self.row.values().map(|&v| c2(v)).sum();
        let s_col: u64 = self.col.values().map(|&v| c2(v)).sum();
        (s_cells, s_row, s_col, c2(self.n))
    }
}

/// Fraction of sample pairs on which the two partitions agree.
pub fn rand_index(pair: &PartitionPair) -> Result<f64> {
    if pair.n() < 2 {
        return Err(Error::Metric("rand index needs at least 2 samples".into()));
    }
    let (s_cells, s_row, s_col, total) = Contingency::build(pair).pair_sums();
    // agreements = same-in-both + different-in-both
    let agree = total + 2 * s_cells - s_row - s_col;
    Ok(agree as f64 / total as f64)
}

/// Chance-corrected Rand index via the hypergeometric expectation.
pub fn adjusted_rand_index(pair: &PartitionPair) -> Result<f64> {
    if pair.n() < 2 {
        return Err(Error::Metric("ARI needs at least 2 samples".into()));
    }
    let (s_cells, s_row, s_col, total) = Contingency::build(pair).pair_sums();
    let expected = (s_row as u128 * s_col as u128) as f64 / total as f64;
    let max_index = 0.5 * (s_row + s_col) as f64;
    let denom = max_index - expected;
    if denom == 0.0 {
        return if pair.equivalent() {
            Ok(1.0)
        } else {
            Err(Error::Metric(
                "ARI undefined: expected index equals maximum index".into(),
            ))
        };
    }
    Ok((s_cells as f64 - expected) / denom)
}

/// Mutual information normalized by the mean of the two entropies
/// (natural logarithm; the ratio is base-invariant).
pub fn nmi(pair: &PartitionPair) -> Result<f64> {
    let cont = Contingency::build(pair);
    let n = cont.n as f64;
    let entropy = |counts: &HashMap<usize, u64>| -> f64 {
        -counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.ln()
            })
            .sum::<f64>()
    };
    let h_t = entropy(&cont.row);
    let h_p = entropy(&cont.col);
    if h_t == 0.0 && h_p == 0.0 {
        // both constant: identical single-cluster partitions
        return Ok(1.0);
    }
    if pair.equivalent() {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (&(t, p), &c) in &cont.cells {
        let pij = c as f64 / n;
        let pi = cont.row[&t] as f64 / n;
        let pj = cont.col[&p] as f64 / n;
        mi += pij * (pij / (pi * pj)).ln();
    }
    Ok((mi / ((h_t + h_p) / 2.0)).clamp(0.0, 1.0))
}

/// Fixed-key metric bundle emitted by evaluation commands.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub n_samples: usize,
}

impl MetricsReport {
    /// Single-label classification report; ARI/NMI compare the predicted
    /// classes against the true ones as partitions.
    pub fn classification(truth: &[usize], pred: &[usize]) -> Result<Self> {
        let tally = ConfusionTally::from_single_label(truth, pred)?;
        let (ari, nmi_v) = if truth.len() >= 2 {
            let pair = PartitionPair::new(truth, pred)?;
            (adjusted_rand_index(&pair).ok(), nmi(&pair).ok())
        } else {
            (None, None)
        };
        Ok(Self {
            micro_f1: tally.micro_f1(),
            macro_f1: tally.macro_f1(),
            ari,
            nmi: nmi_v,
            n_samples: truth.len(),
        })
    }

    /// Multi-label report; pairwise clustering metrics do not apply.
    pub fn multilabel(truth: &[bool], pred: &[bool], c: usize) -> Result<Self> {
        let tally = ConfusionTally::from_indicator(truth, pred, c)?;
        Ok(Self {
            micro_f1: tally.micro_f1(),
            macro_f1: tally.macro_f1(),
            ari: None,
            nmi: None,
            n_samples: truth.len() / c,
        })
    }

    /// Clustering report from two partitions. Cluster ids carry no class
    /// alignment, so F1 is computed after mapping each cluster to its
    /// majority class.
    pub fn clustering(truth: &[usize], pred: &[usize]) -> Result<Self> {
        let pair = PartitionPair::new(truth, pred)?;
        let mut votes: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
        for (&t, &p) in truth.iter().zip(pred) {
            *votes.entry(p).or_default().entry(t).or_insert(0) += 1;
        }
        let mapped: Vec<usize> = pred
            .iter()
            .map(|p| {
                let counts = &votes[p];
                // deterministic majority: highest count, lowest class on ties
                let mut best = (usize::MAX, 0usize);
                for (&class, &count) in counts {
                    if count > best.1 || (count == best.1 && class < best.0) {
                        best = (class, count);
                    }
                }
                best.0
            })
            .collect();
        let tally = ConfusionTally::from_single_label(truth, &mapped)?;
        Ok(Self {
            micro_f1: tally.micro_f1(),
            macro_f1: tally.macro_f1(),
            ari: Some(adjusted_rand_index(&pair)?),
            nmi: Some(nmi(&pair)?),
            n_samples: truth.len(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_one() {
        let y = vec![0, 1, 2, 1, 0];
        assert_eq!(micro_f1(&y, &y).unwrap(), 1.0);
        assert_eq!(macro_f1(&y, &y).unwrap(), 1.0);
    }

    #[test]
    fn micro_f1_equals_accuracy_for_single_label() {
        let t = vec![0, 1, 2, 1];
        let p = vec![0, 1, 1, 1];
        assert!((micro_f1(&t, &p).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn all_wrong_scores_zero() {
        let t = vec![0, 0, 1];
        let p = vec![1, 1, 0];
        assert_eq!(micro_f1(&t, &p).unwrap(), 0.0);
    }

    #[test]
    fn macro_f1_hand_counts() {
        // class 0: tp=2 fp=1 fn=0 -> f1 = 0.8; class 1: tp=0 -> f1 = 0
        let t = vec![0, 0, 1];
        let p = vec![0, 0, 0];
        assert!((macro_f1(&t, &p).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn f1_invariant_under_consistent_relabel() {
        let t = vec![0, 1, 2, 1, 0, 2];
        let p = vec![0, 1, 1, 1, 2, 2];
        let relabel = |v: &[usize]| -> Vec<usize> { v.iter().map(|&x| (x + 1) % 3).collect() };
        assert_eq!(
            macro_f1(&t, &p).unwrap(),
            macro_f1(&relabel(&t), &relabel(&p)).unwrap()
        );
        assert_eq!(
            micro_f1(&t, &p).unwrap(),
            micro_f1(&relabel(&t), &relabel(&p)).unwrap()
        );
    }

    #[test]
    fn rand_index_pair_enumeration_example() {
        // pairs: (0,3) and (1,2) agree -> 2/6
        let t = vec![0, 0, 1, 1];
        let p = vec![0, 1, 0, 1];
        let pair = PartitionPair::new(&t, &p).unwrap();
        assert!((rand_index(&pair).unwrap() - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rand_index_extremes() {
        let t = vec![0, 0, 1, 1];
        let pair = PartitionPair::new(&t, &t).unwrap();
        assert_eq!(rand_index(&pair).unwrap(), 1.0);

        let a = vec![0, 0];
        let b = vec![0, 1];
        let pair = PartitionPair::new(&a, &b).unwrap();
        assert_eq!(rand_index(&pair).unwrap(), 0.0);

        let one = vec![0];
        assert!(rand_index(&PartitionPair::new(&one, &one).unwrap()).is_err());
    }

    #[test]
    fn ari_identical_partitions() {
        let t = vec![0, 1, 1, 2, 0];
        let pair = PartitionPair::new(&t, &t).unwrap();
        assert_eq!(adjusted_rand_index(&pair).unwrap(), 1.0);
    }

    #[test]
    fn ari_invariant_under_relabel() {
        let t = vec![0, 0, 1, 1, 2, 2, 0];
        let p = vec![1, 1, 0, 0, 2, 0, 1];
        let relabeled: Vec<usize> = p.iter().map(|&x| (x + 2) % 3).collect();
        let a = adjusted_rand_index(&PartitionPair::new(&t, &p).unwrap()).unwrap();
        let b = adjusted_rand_index(&PartitionPair::new(&t, &relabeled).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ari_degenerate_single_cluster_both() {
        let t = vec![0, 0, 0];
        let p = vec![5, 5, 5];
        let pair = PartitionPair::new(&t, &p).unwrap();
        assert_eq!(adjusted_rand_index(&pair).unwrap(), 1.0);
    }

    #[test]
    fn nmi_identical_and_relabeled() {
        let t = vec![0, 0, 1, 1];
        let p = vec![1, 1, 0, 0];
        assert_eq!(nmi(&PartitionPair::new(&t, &t).unwrap()).unwrap(), 1.0);
        assert_eq!(nmi(&PartitionPair::new(&t, &p).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn nmi_constant_partitions() {
        let t = vec![0, 0, 0];
        let p = vec![2, 2, 2];
        assert_eq!(nmi(&PartitionPair::new(&t, &p).unwrap()).unwrap(), 1.0);
        // one constant, one not: zero information
        let q = vec![0, 1, 0];
        assert_eq!(nmi(&PartitionPair::new(&t, &q).unwrap()).unwrap(), 0.0);
    }

    #[test]
    fn report_serializes_fixed_keys() {
        let r = MetricsReport::classification(&[0, 1, 1], &[0, 1, 0]).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        for key in ["micro_f1", "macro_f1", "ari", "nmi", "n_samples"] {
            assert!(json.contains(&format!("\"{key}\"")), "missing {key} in {json}");
        }
    }

    #[test]
    fn paper_literal_formulas_differ_from_standard() {
        // the printed k-placement does not reduce to the harmonic mean
        let t = vec![0, 1, 2, 1];
        let p = vec![0, 1, 1, 1];
        let tally = ConfusionTally::from_single_label(&t, &p).unwrap();
        let lit = tally.micro_f1_paper_literal();
        assert!(lit.is_finite() && lit >= 0.0);
        assert!((lit - tally.micro_f1()).abs() > 1e-3);
    }
}
