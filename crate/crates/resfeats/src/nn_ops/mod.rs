//! Forward inference kernels (convolution, batch norm, pooling, fully
//! connected, softmax) and the backward kernels the trainable head needs.
//!
//! All kernels are pure functions: f32 storage in and out, f64
//! accumulation inside every reduction. Loop orders are fixed, so results
//! are bit-deterministic.

mod batchnorm;
mod conv;
mod fc;
mod matmul;
mod pool;
mod softmax;

pub use batchnorm::batchnorm_infer;
pub use conv::{conv1x1_backward, conv2d};
pub use fc::{fc_backward, fc_forward};
pub use matmul::matmul;
pub use pool::{global_avgpool, maxpool2d, maxpool_backward};
pub use softmax::{relu_backward, softmax, softmax_ce, softmax_ce_backward};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Convolution weights and geometry.
///
/// `weights` is `[out_channels, in_channels, kH, kW]`; padding is
/// symmetric zero-padding.
#[derive(Debug, Clone)]
pub struct ConvParams {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
    pub stride: usize,
    pub padding: usize,
}

impl ConvParams {
    pub fn new(
        weights: Tensor,
        bias: Option<Tensor>,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if weights.rank() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "conv weights must be rank 4 [out,in,kH,kW], got rank {}",
                weights.rank()
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidGeometry("conv stride must be positive".into()));
        }
        let out_channels = weights.shape()[0];
        if let Some(b) = &bias {
            if b.shape() != [out_channels] {
                return Err(Error::ShapeMismatch(format!(
                    "conv bias length {:?} does not match {out_channels} output channels",
                    b.shape()
                )));
            }
        }
        Ok(Self { weights, bias, stride, padding })
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        (self.weights.shape()[2], self.weights.shape()[3])
    }
}

/// Batch normalization statistics and affine parameters (inference only).
#[derive(Debug, Clone)]
pub struct BatchNormParams {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub epsilon: f32,
}

impl BatchNormParams {
    pub fn new(
        gamma: Tensor,
        beta: Tensor,
        running_mean: Tensor,
        running_var: Tensor,
        epsilon: f32,
    ) -> Result<Self> {
        let c = gamma.len();
        for (name, t) in [("gamma", &gamma), ("beta", &beta), ("running_mean", &running_mean), ("running_var", &running_var)] {
            if t.shape() != [c] {
                return Err(Error::ShapeMismatch(format!(
                    "batchnorm {name} must be rank 1 of length {c}, got {:?}",
                    t.shape()
                )));
            }
        }
        if running_var.data().iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidConfig(
                "batchnorm running_var has a negative entry".into(),
            ));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "batchnorm epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(Self { gamma, beta, running_mean, running_var, epsilon })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Identity transform for `c` channels: gamma 1, beta 0, mean 0, var 1.
    pub fn identity(c: usize) -> Self {
        Self {
            gamma: Tensor::full(vec![c], 1.0),
            beta: Tensor::zeros(vec![c]),
            running_mean: Tensor::zeros(vec![c]),
            running_var: Tensor::full(vec![c], 1.0),
            epsilon: 1e-5,
        }
    }
}

/// Floor-mode output extent: floor((h + 2·pad − k) / stride) + 1.
pub(crate) fn out_extent(h: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    let span = h + 2 * pad;
    if k == 0 {
        return Err(Error::InvalidGeometry("window extent must be >= 1".into()));
    }
    if k > span {
        return Err(Error::InvalidGeometry(format!(
            "window {k} does not fit input extent {h} with padding {pad}"
        )));
    }
    Ok((span - k) / stride + 1)
}
