//! Batch normalization, inference form (stored statistics only).

use super::BatchNormParams;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per channel c: gamma[c]·(x − mean[c]) / sqrt(var[c] + eps) + beta[c],
/// evaluated in f64 per element.
pub fn batchnorm_infer(input: &Tensor, p: &BatchNormParams) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    if c != p.channels() {
        return Err(Error::ShapeMismatch(format!(
            "batchnorm input has {c} channels, parameters have {}",
            p.channels()
        )));
    }
    let mut out = Vec::with_capacity(input.len());
    let plane = h * w;
    for ci in 0..c {
        let gamma = p.gamma.data()[ci] as f64;
        let beta = p.beta.data()[ci] as f64;
        let mean = p.running_mean.data()[ci] as f64;
        let denom = (p.running_var.data()[ci] as f64 + p.epsilon as f64).sqrt();
        let scale = gamma / denom;
        for &x in &input.data()[ci * plane..(ci + 1) * plane] {
            out.push((scale * (x as f64 - mean) + beta) as f32);
        }
    }
    Tensor::new(vec![c, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_parameters_pass_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f32> = (0..2 * 3 * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Tensor::new(vec![2, 3, 3], data).unwrap();
        let mut p = BatchNormParams::identity(2);
        p.epsilon = 1e-12;
        let y = batchnorm_infer(&x, &p).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn zero_gamma_yields_constant_beta() {
        let x = Tensor::full(vec![2, 2, 2], 3.0);
        let p = BatchNormParams::new(
            Tensor::zeros(vec![2]),
            Tensor::new(vec![2], vec![0.5, -1.5]).unwrap(),
            Tensor::zeros(vec![2]),
            Tensor::full(vec![2], 1.0),
            1e-5,
        )
        .unwrap();
        let y = batchnorm_infer(&x, &p).unwrap();
        assert!(y.data()[..4].iter().all(|&v| v == 0.5));
        assert!(y.data()[4..].iter().all(|&v| v == -1.5));
    }

    #[test]
    fn matches_scalar_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let c = 3;
        let (h, w) = (4, 5);
        let x = Tensor::new(
            vec![c, h, w],
            (0..c * h * w).map(|_| rng.gen_range(-3.0f32..3.0)).collect(),
        )
        .unwrap();
        let p = BatchNormParams::new(
            Tensor::new(vec![c], (0..c).map(|_| rng.gen_range(0.1f32..2.0)).collect()).unwrap(),
            Tensor::new(vec![c], (0..c).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap(),
            Tensor::new(vec![c], (0..c).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap(),
            Tensor::new(vec![c], (0..c).map(|_| rng.gen_range(0.01f32..4.0)).collect()).unwrap(),
            1e-5,
        )
        .unwrap();
        let y = batchnorm_infer(&x, &p).unwrap();
        for ci in 0..c {
            for i in 0..h * w {
                let xv = x.data()[ci * h * w + i] as f64;
                let want = p.gamma.data()[ci] as f64 * (xv - p.running_mean.data()[ci] as f64)
                    / (p.running_var.data()[ci] as f64 + p.epsilon as f64).sqrt()
                    + p.beta.data()[ci] as f64;
                let got = y.data()[ci * h * w + i] as f64;
                assert!(
                    (got - want).abs() <= 1e-6 * want.abs().max(1.0),
                    "{got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn rejects_channel_mismatch() {
        let x = Tensor::zeros(vec![3, 2, 2]);
        let p = BatchNormParams::identity(2);
        assert!(matches!(
            batchnorm_infer(&x, &p),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
