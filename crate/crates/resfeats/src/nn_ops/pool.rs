//! Max pooling (forward and backward) and global average pooling.

use super::out_extent;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-window maximum over each channel independently, floor-mode
/// geometry with symmetric zero-width... padding rows/columns are treated
/// as absent (−inf), i.e. each window is clamped to the valid region.
/// Requires padding < window so no window is empty.
pub fn maxpool2d(input: &Tensor, k: usize, stride: usize, padding: usize) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    let (oh, ow) = pool_geometry(h, w, k, stride, padding)?;
    let mut out = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        let chan = &input.data()[ci * h * w..(ci + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, y1, x0, x1) = window_bounds(oy, ox, k, stride, padding, h, w);
                let mut best = f32::NEG_INFINITY;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = chan[y * w + x];
                        if v > best {
                            best = v;
                        }
                    }
                }
                out.push(best);
            }
        }
    }
    Tensor::new(vec![c, oh, ow], out)
}

/// Routes each output gradient to the argmax position of its window;
/// ties break to the first position in row-major scan order.
pub fn maxpool_backward(
    input: &Tensor,
    k: usize,
    stride: usize,
    padding: usize,
    grad_out: &Tensor,
) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    let (oh, ow) = pool_geometry(h, w, k, stride, padding)?;
    if grad_out.shape() != [c, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "grad_out shape {:?} does not match pooled output [{c},{oh},{ow}]",
            grad_out.shape()
        )));
    }
    let mut grad = vec![0.0f64; c * h * w];
    for ci in 0..c {
        let chan = &input.data()[ci * h * w..(ci + 1) * h * w];
        for oy in 0..oh {
            for ox in 0..ow {
                let (y0, y1, x0, x1) = window_bounds(oy, ox, k, stride, padding, h, w);
                let mut best = f32::NEG_INFINITY;
                let mut arg = y0 * w + x0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = chan[y * w + x];
                        if v > best {
                            best = v;
                            arg = y * w + x;
                        }
                    }
                }
                grad[ci * h * w + arg] += grad_out.data()[(ci * oh + oy) * ow + ox] as f64;
            }
        }
    }
    Tensor::new(vec![c, h, w], grad.iter().map(|&v| v as f32).collect())
}

/// Per-channel mean over the spatial plane.
pub fn global_avgpool(input: &Tensor) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    let plane = (h * w) as f64;
    let mut out = Vec::with_capacity(c);
    for ci in 0..c {
        let mut acc = 0.0f64;
        for &v in &input.data()[ci * h * w..(ci + 1) * h * w] {
            acc += v as f64;
        }
        out.push((acc / plane) as f32);
    }
    Tensor::new(vec![c], out)
}

fn pool_geometry(h: usize, w: usize, k: usize, stride: usize, padding: usize) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(Error::InvalidGeometry("pool stride must be positive".into()));
    }
    if padding >= k {
        return Err(Error::InvalidGeometry(format!(
            "pool padding {padding} must be smaller than window {k}"
        )));
    }
    Ok((out_extent(h, k, stride, padding)?, out_extent(w, k, stride, padding)?))
}

/// Half-open bounds of the valid part of one pooling window.
fn window_bounds(
    oy: usize,
    ox: usize,
    k: usize,
    stride: usize,
    padding: usize,
    h: usize,
    w: usize,
) -> (usize, usize, usize, usize) {
    let y0 = (oy * stride).saturating_sub(padding);
    let x0 = (ox * stride).saturating_sub(padding);
    let y1 = (oy * stride + k - padding).min(h);
    let x1 = (ox * stride + k - padding).min(w);
    (y0, y1, x0, x1)
}
