//! 2-D convolution (cross-correlation) and the 1×1 backward pass.

use super::{matmul, out_extent, ConvParams};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Cross-correlates `input` [C,H,W] with `p.weights` [C',C,kH,kW] under
/// symmetric zero padding, floor-mode geometry. No kernel flip.
///
/// Internally lowers the input to a patch matrix and multiplies
/// (im2col), which agrees with direct summation because both accumulate
/// in f64.
pub fn conv2d(input: &Tensor, p: &ConvParams) -> Result<Tensor> {
    let (c, h, w) = input.dims3()?;
    if c != p.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv input has {c} channels, weights expect {}",
            p.in_channels()
        )));
    }
    let (kh, kw) = p.kernel();
    let oh = out_extent(h, kh, p.stride, p.padding)?;
    let ow = out_extent(w, kw, p.stride, p.padding)?;
    let co = p.out_channels();

    // Patch matrix: rows are (channel, ky, kx) taps, columns are output
    // positions. Out-of-bounds taps stay zero.
    let k = c * kh * kw;
    let n = oh * ow;
    let mut col = vec![0.0f32; k * n];
    let data = input.data();
    for ci in 0..c {
        let chan = &data[ci * h * w..(ci + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = &mut col[((ci * kh + ky) * kw + kx) * n..][..n];
                for oy in 0..oh {
                    let iy = (oy * p.stride + ky) as isize - p.padding as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &chan[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..ow {
                        let ix = (ox * p.stride + kx) as isize - p.padding as isize;
                        if ix >= 0 && ix < w as isize {
                            row[oy * ow + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }

    let mut out = matmul(p.weights.data(), &col, co, k, n);
    if let Some(bias) = &p.bias {
        for (o, &b) in bias.data().iter().enumerate() {
            for v in &mut out[o * n..(o + 1) * n] {
                *v += b;
            }
        }
    }
    Tensor::new(vec![co, oh, ow], out)
}

/// Analytic gradients of a 1×1 stride-1 unpadded convolution.
///
/// Returns `(grad_input, grad_weights, grad_bias)`; `grad_bias` is
/// present exactly when `p.bias` is.
pub fn conv1x1_backward(
    input: &Tensor,
    p: &ConvParams,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Option<Tensor>)> {
    let (c, h, w) = input.dims3()?;
    if p.kernel() != (1, 1) || p.stride != 1 || p.padding != 0 {
        return Err(Error::UnsupportedGeometry(
            "backward pass covers only 1x1 convolution, stride 1, no padding".into(),
        ));
    }
    if c != p.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "conv input has {c} channels, weights expect {}",
            p.in_channels()
        )));
    }
    let co = p.out_channels();
    let (gc, gh, gw) = grad_out.dims3()?;
    if (gc, gh, gw) != (co, h, w) {
        return Err(Error::ShapeMismatch(format!(
            "grad_out shape [{gc},{gh},{gw}] does not match forward output [{co},{h},{w}]"
        )));
    }

    let n = h * w;
    let x = input.data();
    let g = grad_out.data();
    let wts = p.weights.data(); // [co, c] since kernel is 1x1

    // grad_input[ci, s] = sum_o w[o, ci] * g[o, s]
    let mut grad_input = vec![0.0f64; c * n];
    for o in 0..co {
        for ci in 0..c {
            let wv = wts[o * c + ci] as f64;
            if wv == 0.0 {
                continue;
            }
            let grow = &g[o * n..(o + 1) * n];
            let irow = &mut grad_input[ci * n..(ci + 1) * n];
            for (gi, &gv) in irow.iter_mut().zip(grow) {
                *gi += wv * gv as f64;
            }
        }
    }

    // grad_w[o, ci] = sum_s g[o, s] * x[ci, s]
    let mut grad_w = vec![0.0f32; co * c];
    for o in 0..co {
        let grow = &g[o * n..(o + 1) * n];
        for ci in 0..c {
            let xrow = &x[ci * n..(ci + 1) * n];
            let mut acc = 0.0f64;
            for (&gv, &xv) in grow.iter().zip(xrow) {
                acc += gv as f64 * xv as f64;
            }
            grad_w[o * c + ci] = acc as f32;
        }
    }

    let grad_bias = match &p.bias {
        Some(_) => {
            let mut gb = vec![0.0f32; co];
            for o in 0..co {
                let mut acc = 0.0f64;
                for &gv in &g[o * n..(o + 1) * n] {
                    acc += gv as f64;
                }
                gb[o] = acc as f32;
            }
            Some(Tensor::new(vec![co], gb)?)
        }
        None => None,
    };

    Ok((
        Tensor::new(vec![c, h, w], grad_input.iter().map(|&v| v as f32).collect())?,
        Tensor::new(vec![co, c, 1, 1], grad_w)?,
        grad_bias,
    ))
}
