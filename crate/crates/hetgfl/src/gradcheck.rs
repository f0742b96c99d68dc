//! Numerical gradient verification via central finite differences.

use crate::autodiff::{Tape, TensorId};
use crate::error::{Error, Result};

/// Compares tape gradients against central differences.
///
/// `build` must construct a fresh forward pass from the given parameter
/// values and return the tape, the scalar loss, and the leaf ids matching
/// `params` one-to-one. Returns the maximum over all parameter entries of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn grad_check<F>(mut build: F, params: &[Vec<f64>], eps: f64) -> Result<f64>
where
    F: FnMut(&[Vec<f64>]) -> Result<(Tape, TensorId, Vec<TensorId>)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!(
            "grad_check: eps {eps} outside [1e-7, 1e-3]"
        )));
    }

    let (mut tape, loss, ids) = build(params)?;
    if ids.len() != params.len() {
        return Err(Error::Config(
            "grad_check: build returned a different number of leaves than params".into(),
        ));
    }
    if !tape.scalar(loss)?.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| tape.grad(id).to_vec()).collect();

    let mut eval = |work: &[Vec<f64>]| -> Result<f64> {
        let (t, l, _) = build(work)?;
        let v = t.scalar(l)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        Ok(v)
    };

    let mut work = params.to_vec();
    let mut max_rel: f64 = 0.0;
    for p in 0..params.len() {
        for j in 0..params[p].len() {
            let orig = params[p][j];
            work[p][j] = orig + eps;
            let fp = eval(&work)?;
            work[p][j] = orig - eps;
            let fm = eval(&work)?;
            work[p][j] = orig;
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[p][j];
            let rel = (a - numeric).abs() / a.abs().max(1.0);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_form_checks_tightly() {
        // f(x) = x' M x with fixed M, analytic gradient known exactly
        let m = vec![2.0, 0.5, 0.5, 3.0];
        let x0 = vec![vec![0.7, -1.3]];
        let err = grad_check(
            |p| {
                let mut t = Tape::new();
                let x = t.leaf(&[1, 2], p[0].clone())?;
                let mm = t.leaf(&[2, 2], m.clone())?;
                let xm = t.matmul(x, mm)?;
                let prod = t.hadamard(xm, x)?;
                let loss = t.sum_all(prod)?;
                Ok((t, loss, vec![x]))
            },
            &x0,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-8, "max relative error {err}");
    }

    #[test]
    fn zero_function_has_zero_error() {
        let x0 = vec![vec![0.4, 0.2, -0.9]];
        let err = grad_check(
            |p| {
                let mut t = Tape::new();
                let x = t.leaf(&[3], p[0].clone())?;
                let z = t.scale(x, 0.0)?;
                let loss = t.sum_all(z)?;
                Ok((t, loss, vec![x]))
            },
            &x0,
            1e-5,
        )
        .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn eps_out_of_range_rejected() {
        let r = grad_check(
            |_| {
                let mut t = Tape::new();
                let l = t.scalar_leaf(0.0);
                Ok((t, l, vec![]))
            },
            &[],
            1e-2,
        );
        assert!(r.is_err());
    }

    #[test]
    fn non_finite_loss_reported() {
        let x0 = vec![vec![0.0]];
        let r = grad_check(
            |p| {
                let mut t = Tape::new();
                let x = t.leaf(&[1], p[0].clone())?;
                let l = t.scale(x, f64::INFINITY)?;
                Ok((t, l, vec![x]))
            },
            &x0,
            1e-5,
        );
        assert!(matches!(r, Err(Error::NonFiniteLoss)));
    }
}
