//! Property tests for the tape primitives.

use proptest::prelude::*;

use hetgfl::Tape;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_rows_are_distributions(vals in finite_vec(24)) {
        let mut tape = Tape::new();
        let a = tape.leaf(&[4, 6], vals).unwrap();
        let y = tape.softmax_rows(a).unwrap();
        for i in 0..4 {
            let row = &tape.values(y)[i * 6..(i + 1) * 6];
            let s: f64 = row.iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn hadamard_with_ones_is_identity(vals in finite_vec(18)) {
        let mut tape = Tape::new();
        let a = tape.leaf(&[3, 6], vals.clone()).unwrap();
        let ones = tape.leaf(&[3, 6], vec![1.0; 18]).unwrap();
        let h = tape.hadamard(a, ones).unwrap();
        prop_assert_eq!(tape.values(h), vals.as_slice());
    }

    #[test]
    fn analytic_gradients_track_finite_differences(
        xs in finite_vec(6),
        ws in finite_vec(6),
    ) {
        // act(x . w) composed with squared softmax, a representative chain
        let eval = |xv: &[f64], wv: &[f64]| -> (f64, Vec<f64>) {
            let mut t = Tape::new();
            let x = t.leaf(&[2, 3], xv.to_vec()).unwrap();
            let w = t.leaf(&[3, 2], wv.to_vec()).unwrap();
            let p = t.matmul(x, w).unwrap();
            let r = t.leaky_relu(p, 0.01).unwrap();
            let s = t.softmax_rows(r).unwrap();
            let l = t.sum_sq(s).unwrap();
            let lv = t.scalar(l).unwrap();
            t.backward(l).unwrap();
            (lv, t.grad(w).to_vec())
        };
        let (_, grad) = eval(&xs, &ws);
        let eps = 1e-6;
        let mut wp = ws.clone();
        for j in 0..ws.len() {
            wp[j] = ws[j] + eps;
            let (fp, _) = eval(&xs, &wp);
            wp[j] = ws[j] - eps;
            let (fm, _) = eval(&xs, &wp);
            wp[j] = ws[j];
            let numeric = (fp - fm) / (2.0 * eps);
            let rel = (grad[j] - numeric).abs() / grad[j].abs().max(1.0);
            prop_assert!(rel <= 1e-4, "entry {}: {} vs {}", j, grad[j], numeric);
        }
    }

    #[test]
    fn zero_grad_then_backward_is_reproducible(vals in finite_vec(12)) {
        let mut tape = Tape::new();
        let x = tape.leaf(&[3, 4], vals).unwrap();
        let s = tape.softmax_rows(x).unwrap();
        let l = tape.sum_sq(s).unwrap();
        tape.backward(l).unwrap();
        let g1 = tape.grad(x).to_vec();
        tape.zero_grad();
        tape.backward(l).unwrap();
        prop_assert_eq!(g1, tape.grad(x));
    }
}

#[test]
fn segment_softmax_closed_form() {
    // scores (0, ln 3) inside one segment -> (0.25, 0.75)
    let mut tape = Tape::new();
    let x = tape.leaf(&[2, 1], vec![0.0, 3.0f64.ln()]).unwrap();
    let y = tape
        .segment_softmax(x, std::rc::Rc::new(vec![0, 2]))
        .unwrap();
    assert!((tape.values(y)[0] - 0.25).abs() <= 1e-15);
    assert!((tape.values(y)[1] - 0.75).abs() <= 1e-15);
}
