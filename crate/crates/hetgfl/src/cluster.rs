//! Lloyd k-means with k-means++ seeding over learned embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// Row-major `k x d`.
    pub centroids: Vec<f64>,
    /// Sum of squared distances to assigned centroids.
    pub inertia: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters the rows of `x` (`n x d`, row-major) into `k` groups.
///
/// Seeding is k-means++; iteration stops when the largest centroid shift
/// falls below `tol` or after `max_iter` rounds. An emptied cluster claims
/// the point farthest from its current centroid. Deterministic in `seed`.
pub fn kmeans(
    x: &[f64],
    n: usize,
    d: usize,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<KMeansResult> {
    if n * d != x.len() {
        return Err(Error::Metric(format!(
            "kmeans: {} values are not an {n} x {d} matrix",
            x.len()
        )));
    }
    if k == 0 || n < k {
        return Err(Error::Metric(format!("kmeans: need n >= k >= 1, got n={n}, k={k}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Metric("kmeans: non-finite input".into()));
    }

    let row = |i: usize| &x[i * d..(i + 1) * d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids = vec![0.0; k * d];
    let first = rng.gen_range(0..n);
    centroids[0..d].copy_from_slice(row(first));
    let mut dist2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[0..d])).collect();
    for c in 1..k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d2) in dist2.iter().enumerate() {
                target -= d2;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        centroids[c * d..(c + 1) * d].copy_from_slice(row(pick));
        for i in 0..n {
            let d2 = sq_dist(row(i), &centroids[c * d..(c + 1) * d]);
            if d2 < dist2[i] {
                dist2[i] = d2;
            }
        }
    }

    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;

        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d2 = sq_dist(row(i), &centroids[c * d..(c + 1) * d]);
                if d2 < best_d {
                    best_d = d2;
                    best = c;
                }
            }
            assignments[i] = best;
        }

        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let c = assignments[i];
            counts[c] += 1;
            for (s, v) in sums[c * d..(c + 1) * d].iter_mut().zip(row(i)) {
                *s += v;
            }
        }

        // repair empty clusters with the point farthest from its centroid
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (mut far_i, mut far_d) = (0, -1.0);
            for i in 0..n {
                if counts[assignments[i]] <= 1 {
                    continue;
                }
                let d2 = sq_dist(row(i), &centroids[assignments[i] * d..(assignments[i] + 1) * d]);
                if d2 > far_d {
                    far_d = d2;
                    far_i = i;
                }
            }
            let old = assignments[far_i];
            counts[old] -= 1;
            for (s, v) in sums[old * d..(old + 1) * d].iter_mut().zip(row(far_i)) {
                *s -= v;
            }
            assignments[far_i] = c;
            counts[c] = 1;
            sums[c * d..(c + 1) * d].copy_from_slice(row(far_i));
        }

        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut moved = 0.0;
            for j in 0..d {
                let new = sums[c * d + j] * inv;
                let delta = new - centroids[c * d + j];
                moved += delta * delta;
                centroids[c * d + j] = new;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < tol {
            break;
        }
    }

    // final assignment against the converged centroids
    let mut inertia = 0.0;
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let d2 = sq_dist(row(i), &centroids[c * d..(c + 1) * d]);
            if d2 < best_d {
                best_d = d2;
                best = c;
            }
        }
        assignments[i] = best;
        inertia += best_d;
    }

    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        iterations,
    })
}
