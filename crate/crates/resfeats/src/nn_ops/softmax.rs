//! Softmax cross-entropy and the small activation backward helpers.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stabilized softmax with cross-entropy loss against a
/// class index. Subtracts the max logit before exponentiating; all
/// arithmetic in f64.
pub fn softmax_ce(logits: &Tensor, label: usize) -> Result<(f32, Tensor)> {
    let k = logits.len();
    if logits.rank() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "logits must be rank 1, got {:?}",
            logits.shape()
        )));
    }
    if label >= k {
        return Err(Error::IndexOutOfRange(format!(
            "label {label} out of range for {k} classes"
        )));
    }
    let max = logits.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let exps: Vec<f64> = logits.data().iter().map(|&v| (v as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let probs: Vec<f64> = exps.iter().map(|&e| e / sum).collect();
    let loss = -(probs[label].ln());
    Ok((
        loss as f32,
        Tensor::new(vec![k], probs.iter().map(|&p| p as f32).collect())?,
    ))
}

/// Stabilized softmax alone, without a loss.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 1 {
        return Err(Error::ShapeMismatch(format!(
            "logits must be rank 1, got {:?}",
            logits.shape()
        )));
    }
    let max = logits.data().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let exps: Vec<f64> = logits.data().iter().map(|&v| (v as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::new(
        vec![logits.len()],
        exps.iter().map(|&e| (e / sum) as f32).collect(),
    )
}

/// Gradient of softmax-CE loss w.r.t. the logits: probs − onehot(label).
pub fn softmax_ce_backward(probs: &Tensor, label: usize) -> Result<Tensor> {
    if label >= probs.len() {
        return Err(Error::IndexOutOfRange(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let mut g = probs.data().to_vec();
    g[label] -= 1.0;
    Tensor::new(vec![probs.len()], g)
}

/// Gradient of max(0, x): passes grad_out where the forward input was
/// strictly positive, zero elsewhere (subgradient 0 at x = 0).
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if input.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu grad shape {:?} does not match input {:?}",
            grad_out.shape(),
            input.shape()
        )));
    }
    Tensor::new(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        let (loss, probs) = softmax_ce(&Tensor::full(vec![4], 1.3), 2).unwrap();
        for &p in probs.data() {
            assert!((p - 0.25).abs() <= 1e-6);
        }
        assert!((loss - (4.0f32).ln()).abs() <= 1e-6);
    }

    #[test]
    fn huge_logit_does_not_overflow() {
        let mut logits = vec![0.0f32; 5];
        logits[3] = 1000.0;
        let (loss, probs) = softmax_ce(&Tensor::new(vec![5], logits).unwrap(), 3).unwrap();
        assert!(probs.data()[3] > 0.999);
        assert!(loss.is_finite() && loss >= 0.0);
        assert!(probs.data().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn probs_sum_to_one_even_at_magnitude_1e4() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let k = rng.gen_range(2..8);
            let scale = [1.0f32, 100.0, 1e4][rng.gen_range(0..3)];
            let logits = Tensor::new(
                vec![k],
                (0..k).map(|_| rng.gen_range(-1.0f32..1.0) * scale).collect(),
            )
            .unwrap();
            let (_, probs) = softmax_ce(&logits, 0).unwrap();
            let sum: f64 = probs.data().iter().map(|&p| p as f64).sum();
            assert!((sum - 1.0).abs() <= 1e-6);
            assert!(probs.data().iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn matches_high_precision_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let k = rng.gen_range(2..10);
            let label = rng.gen_range(0..k);
            let logits = Tensor::new(vec![k], (0..k).map(|_| rng.gen_range(-4.0f32..4.0)).collect()).unwrap();
            let (loss, probs) = softmax_ce(&logits, label).unwrap();
            let max = logits.data().iter().cloned().fold(f64::NEG_INFINITY, |m, v| m.max(v as f64));
            let z: f64 = logits.data().iter().map(|&v| (v as f64 - max).exp()).sum();
            for (i, &p) in probs.data().iter().enumerate() {
                let want = (logits.data()[i] as f64 - max).exp() / z;
                assert!((p as f64 - want).abs() <= 1e-6);
            }
            let want_loss = -((logits.data()[label] as f64 - max).exp() / z).ln();
            assert!((loss as f64 - want_loss).abs() <= 1e-6 * want_loss.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_label_out_of_range() {
        assert!(matches!(
            softmax_ce(&Tensor::zeros(vec![3]), 3),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn backward_is_probs_minus_onehot_and_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let k = 5;
        let label = 2;
        let logits = Tensor::new(vec![k], (0..k).map(|_| rng.gen_range(-2.0f32..2.0)).collect()).unwrap();
        let (_, probs) = softmax_ce(&logits, label).unwrap();
        let g = softmax_ce_backward(&probs, label).unwrap();
        let eps = 1e-2f32;
        for i in 0..k {
            let mut lo = logits.data().to_vec();
            let mut hi = lo.clone();
            lo[i] -= eps;
            hi[i] += eps;
            let (ll, _) = softmax_ce(&Tensor::new(vec![k], lo).unwrap(), label).unwrap();
            let (lh, _) = softmax_ce(&Tensor::new(vec![k], hi).unwrap(), label).unwrap();
            let fd = (lh as f64 - ll as f64) / (2.0 * eps as f64);
            assert!((g.data()[i] as f64 - fd).abs() <= 1e-4, "{i}");
        }
    }

    #[test]
    fn relu_backward_masks_nonpositive() {
        let x = Tensor::new(vec![4], vec![-1.0, 0.0, 2.0, 3.0]).unwrap();
        let g = Tensor::full(vec![4], 5.0);
        let gi = relu_backward(&x, &g).unwrap();
        assert_eq!(gi.data(), &[0.0, 0.0, 5.0, 5.0]);
    }
}
