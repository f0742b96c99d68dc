//! Dense compute kernels with sequential and data-parallel variants.
//!
//! The `parallel` feature (on by default) routes large calls through [`par`],
//! which partitions work by output row only. Every output slot is written by
//! exactly one task and inner reductions run in a fixed order, so parallel
//! results are bitwise identical to [`seq`] regardless of thread count.
//! Scatter-style accumulation (overlapping output rows) stays sequential.

/// Minimum number of inner multiply-adds before a kernel goes parallel.
pub const PAR_THRESHOLD: usize = 1 << 14;

pub mod seq {
    /// `c = a · b` with `a: m×k`, `b: k×n`, `c: m×n`, all row-major.
    pub fn matmul(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(a.len(), m * k);
        debug_assert_eq!(b.len(), k * n);
        debug_assert_eq!(c.len(), m * n);
        for i in 0..m {
            let crow = &mut c[i * n..(i + 1) * n];
            crow.fill(0.0);
            let arow = &a[i * k..(i + 1) * k];
            for (l, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b[l * n..(l + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        }
    }

    /// `da += gc · bᵀ` with `gc: m×n`, `b: k×n`, `da: m×k`.
    pub fn matmul_acc_nt(da: &mut [f64], gc: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(da.len(), m * k);
        debug_assert_eq!(gc.len(), m * n);
        debug_assert_eq!(b.len(), k * n);
        for i in 0..m {
            let darow = &mut da[i * k..(i + 1) * k];
            let gcrow = &gc[i * n..(i + 1) * n];
            for (l, dv) in darow.iter_mut().enumerate() {
                let brow = &b[l * n..(l + 1) * n];
                let mut s = 0.0;
                for (gv, bv) in gcrow.iter().zip(brow) {
                    s += gv * bv;
                }
                *dv += s;
            }
        }
    }

    /// `db += aᵀ · gc` with `a: m×k`, `gc: m×n`, `db: k×n`.
    pub fn matmul_acc_tn(db: &mut [f64], a: &[f64], gc: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(db.len(), k * n);
        debug_assert_eq!(a.len(), m * k);
        debug_assert_eq!(gc.len(), m * n);
        for l in 0..k {
            let dbrow = &mut db[l * n..(l + 1) * n];
            for i in 0..m {
                let av = a[i * k + l];
                if av == 0.0 {
                    continue;
                }
                let gcrow = &gc[i * n..(i + 1) * n];
                for (dv, gv) in dbrow.iter_mut().zip(gcrow) {
                    *dv += av * gv;
                }
            }
        }
    }

    /// `out[r] = a[idx[r]]` row-wise, rows of width `d`.
    pub fn gather_rows(out: &mut [f64], a: &[f64], idx: &[usize], d: usize) {
        debug_assert_eq!(out.len(), idx.len() * d);
        for (r, &i) in idx.iter().enumerate() {
            out[r * d..(r + 1) * d].copy_from_slice(&a[i * d..(i + 1) * d]);
        }
    }

    /// `acc[idx[r]] += src[r]` row-wise. Overlapping targets; no parallel variant.
    pub fn scatter_add_rows(acc: &mut [f64], src: &[f64], idx: &[usize], d: usize) {
        debug_assert_eq!(src.len(), idx.len() * d);
        for (r, &i) in idx.iter().enumerate() {
            let row = &src[r * d..(r + 1) * d];
            let dst = &mut acc[i * d..(i + 1) * d];
            for (dv, sv) in dst.iter_mut().zip(row) {
                *dv += sv;
            }
        }
    }

    /// `out[s] = Σ a[r]` over rows `r` in `offsets[s]..offsets[s+1]`.
    pub fn segment_sum(out: &mut [f64], a: &[f64], offsets: &[usize], d: usize) {
        debug_assert_eq!(out.len(), (offsets.len() - 1) * d);
        for s in 0..offsets.len() - 1 {
            let dst = &mut out[s * d..(s + 1) * d];
            dst.fill(0.0);
            for r in offsets[s]..offsets[s + 1] {
                let row = &a[r * d..(r + 1) * d];
                for (dv, sv) in dst.iter_mut().zip(row) {
                    *dv += sv;
                }
            }
        }
    }

    /// Elementwise `out = a ⊙ b`.
    pub fn mul(out: &mut [f64], a: &[f64], b: &[f64]) {
        debug_assert_eq!(out.len(), a.len());
        debug_assert_eq!(out.len(), b.len());
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = x * y;
        }
    }
}

#[cfg(feature = "parallel")]
pub mod par {
    use rayon::prelude::*;

    /// Row-parallel `c = a · b`; each output row is one task.
    pub fn matmul(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(a.len(), m * k);
        debug_assert_eq!(b.len(), k * n);
        debug_assert_eq!(c.len(), m * n);
        c.par_chunks_mut(n).enumerate().for_each(|(i, crow)| {
            crow.fill(0.0);
            let arow = &a[i * k..(i + 1) * k];
            for (l, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let brow = &b[l * n..(l + 1) * n];
                for (cv, &bv) in crow.iter_mut().zip(brow) {
                    *cv += av * bv;
                }
            }
        });
    }

    /// Row-parallel `da += gc · bᵀ`.
    pub fn matmul_acc_nt(da: &mut [f64], gc: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(da.len(), m * k);
        da.par_chunks_mut(k).enumerate().for_each(|(i, darow)| {
            let gcrow = &gc[i * n..(i + 1) * n];
            for (l, dv) in darow.iter_mut().enumerate() {
                let brow = &b[l * n..(l + 1) * n];
                let mut s = 0.0;
                for (gv, bv) in gcrow.iter().zip(brow) {
                    s += gv * bv;
                }
                *dv += s;
            }
        });
    }

    /// Row-parallel `db += aᵀ · gc`; the reduction over `m` stays in index order.
    pub fn matmul_acc_tn(db: &mut [f64], a: &[f64], gc: &[f64], m: usize, k: usize, n: usize) {
        debug_assert_eq!(db.len(), k * n);
        db.par_chunks_mut(n).enumerate().for_each(|(l, dbrow)| {
            for i in 0..m {
                let av = a[i * k + l];
                if av == 0.0 {
                    continue;
                }
                let gcrow = &gc[i * n..(i + 1) * n];
                for (dv, gv) in dbrow.iter_mut().zip(gcrow) {
                    *dv += av * gv;
                }
            }
        });
    }

    pub fn gather_rows(out: &mut [f64], a: &[f64], idx: &[usize], d: usize) {
        debug_assert_eq!(out.len(), idx.len() * d);
        out.par_chunks_mut(d).enumerate().for_each(|(r, dst)| {
            let i = idx[r];
            dst.copy_from_slice(&a[i * d..(i + 1) * d]);
        });
    }

    /// Segment-parallel sum; each segment owns a disjoint output row.
    pub fn segment_sum(out: &mut [f64], a: &[f64], offsets: &[usize], d: usize) {
        debug_assert_eq!(out.len(), (offsets.len() - 1) * d);
        out.par_chunks_mut(d).enumerate().for_each(|(s, dst)| {
            dst.fill(0.0);
            for r in offsets[s]..offsets[s + 1] {
                let row = &a[r * d..(r + 1) * d];
                for (dv, sv) in dst.iter_mut().zip(row) {
                    *dv += sv;
                }
            }
        });
    }

    pub fn mul(out: &mut [f64], a: &[f64], b: &[f64]) {
        debug_assert_eq!(out.len(), a.len());
        debug_assert_eq!(out.len(), b.len());
        out.par_iter_mut()
            .zip(a.par_iter())
            .zip(b.par_iter())
            .for_each(|((o, &x), &y)| *o = x * y);
    }
}

macro_rules! dispatch {
    ($cost:expr, $f:ident ( $($arg:expr),* )) => {{
        #[cfg(feature = "parallel")]
        {
            if $cost >= PAR_THRESHOLD {
                return par::$f($($arg),*);
            }
        }
        seq::$f($($arg),*)
    }};
}

pub(crate) fn matmul(c: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    dispatch!(m * k * n, matmul(c, a, b, m, k, n))
}

pub(crate) fn matmul_acc_nt(da: &mut [f64], gc: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    dispatch!(m * k * n, matmul_acc_nt(da, gc, b, m, k, n))
}

pub(crate) fn matmul_acc_tn(db: &mut [f64], a: &[f64], gc: &[f64], m: usize, k: usize, n: usize) {
    dispatch!(m * k * n, matmul_acc_tn(db, a, gc, m, k, n))
}

pub(crate) fn gather_rows(out: &mut [f64], a: &[f64], idx: &[usize], d: usize) {
    dispatch!(idx.len() * d, gather_rows(out, a, idx, d))
}

pub(crate) fn scatter_add_rows(acc: &mut [f64], src: &[f64], idx: &[usize], d: usize) {
    seq::scatter_add_rows(acc, src, idx, d)
}

pub(crate) fn segment_sum(out: &mut [f64], a: &[f64], offsets: &[usize], d: usize) {
    dispatch!(a.len(), segment_sum(out, a, offsets, d))
}

pub(crate) fn mul(out: &mut [f64], a: &[f64], b: &[f64]) {
    dispatch!(out.len(), mul(out, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = vec![1.0, 0.0, 0.0, 1.0];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let mut c = vec![0.0; 4];
        seq::matmul(&mut c, &a, &b, 2, 2, 2);
        assert_eq!(c, b);
    }

    #[test]
    fn matmul_hand_example() {
        // [[1,2],[3,4]] x [[5,6],[7,8]] = [[19,22],[43,50]]
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b = vec![5.0, 6.0, 7.0, 8.0];
        let mut c = vec![0.0; 4];
        seq::matmul(&mut c, &a, &b, 2, 2, 2);
        assert_eq!(c, vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn segment_sum_with_empty_segment() {
        let a = vec![1.0, 2.0, 10.0, 20.0, 100.0, 200.0];
        let offsets = vec![0, 2, 2, 3];
        let mut out = vec![f64::NAN; 6];
        seq::segment_sum(&mut out, &a, &offsets, 2);
        assert_eq!(out, vec![11.0, 22.0, 0.0, 0.0, 100.0, 200.0]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn par_matches_seq_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let (m, k, n) = (37, 19, 23);
        let a: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..k * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut c1 = vec![0.0; m * n];
        let mut c2 = vec![0.0; m * n];
        seq::matmul(&mut c1, &a, &b, m, k, n);
        par::matmul(&mut c2, &a, &b, m, k, n);
        assert_eq!(c1, c2);

        let gc: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut d1 = vec![0.5; m * k];
        let mut d2 = vec![0.5; m * k];
        seq::matmul_acc_nt(&mut d1, &gc, &b, m, k, n);
        par::matmul_acc_nt(&mut d2, &gc, &b, m, k, n);
        assert_eq!(d1, d2);

        let mut e1 = vec![-0.25; k * n];
        let mut e2 = vec![-0.25; k * n];
        seq::matmul_acc_tn(&mut e1, &a, &gc, m, k, n);
        par::matmul_acc_tn(&mut e2, &a, &gc, m, k, n);
        assert_eq!(e1, e2);
    }
}
