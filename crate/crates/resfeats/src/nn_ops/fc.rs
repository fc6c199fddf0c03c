//! Fully connected (affine) layer, forward and backward.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// W·x + b with weights [m,n], input [n], bias [m].
pub fn fc_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (m, n) = weights.dims2()?;
    if input.shape() != [n] {
        return Err(Error::ShapeMismatch(format!(
            "fc input shape {:?} does not match weight columns {n}",
            input.shape()
        )));
    }
    if bias.shape() != [m] {
        return Err(Error::ShapeMismatch(format!(
            "fc bias shape {:?} does not match weight rows {m}",
            bias.shape()
        )));
    }
    let x = input.data();
    let w = weights.data();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc = bias.data()[i] as f64;
        for (j, &xv) in x.iter().enumerate() {
            acc += w[i * n + j] as f64 * xv as f64;
        }
        out.push(acc as f32);
    }
    Tensor::new(vec![m], out)
}

/// Analytic gradients of the affine map for upstream gradient [m]:
/// grad_input = Wᵀ·g, grad_weights = g⊗x, grad_bias = g.
pub fn fc_backward(
    input: &Tensor,
    weights: &Tensor,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let (m, n) = weights.dims2()?;
    if input.shape() != [n] {
        return Err(Error::ShapeMismatch(format!(
            "fc input shape {:?} does not match weight columns {n}",
            input.shape()
        )));
    }
    if grad_out.shape() != [m] {
        return Err(Error::ShapeMismatch(format!(
            "fc grad_out shape {:?} does not match weight rows {m}",
            grad_out.shape()
        )));
    }
    let x = input.data();
    let w = weights.data();
    let g = grad_out.data();

    let mut grad_input = vec![0.0f64; n];
    let mut grad_w = Vec::with_capacity(m * n);
    for i in 0..m {
        let gi = g[i] as f64;
        for j in 0..n {
            grad_input[j] += w[i * n + j] as f64 * gi;
            grad_w.push((gi * x[j] as f64) as f32);
        }
    }
    Ok((
        Tensor::new(vec![n], grad_input.iter().map(|&v| v as f32).collect())?,
        Tensor::new(vec![m, n], grad_w)?,
        Tensor::new(vec![m], g.to_vec())?,
    ))
}
