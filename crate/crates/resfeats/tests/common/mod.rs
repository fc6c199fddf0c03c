//! Shared test support: a pass/fail harness plus reference
//! implementations kept deliberately independent of the library's
//! kernels (direct summation in f64, a cyclic Jacobi eigensolver, and an
//! all-f64 replica of the shallow head).

#![allow(dead_code)]

use resfeats::scnn::ScnnHead;

/// Runs one acceptance check and prints a single pass/fail line; a
/// failure also panics so the test harness records it.
pub fn criterion(number: usize, what: &str, body: impl FnOnce() -> Result<(), String>) {
    match body() {
        Ok(()) => println!("criterion {number:02} PASS: {what}"),
        Err(msg) => {
            println!("criterion {number:02} FAIL: {what}: {msg}");
            panic!("criterion {number:02} failed: {msg}");
        }
    }
}

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}
pub(crate) use check;

/// Direct-summation convolution (cross-correlation) with zero padding,
/// computed entirely in f64. Returns (values, (co, oh, ow)).
pub fn conv2d_ref(
    x: &[f32],
    (c, h, w): (usize, usize, usize),
    weights: &[f32],
    (co, ci, kh, kw): (usize, usize, usize, usize),
    bias: Option<&[f32]>,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, (usize, usize, usize)) {
    assert_eq!(c, ci);
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = vec![0.0f64; co * oh * ow];
    for o in 0..co {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias.map_or(0.0, |b| b[o] as f64);
                for ic in 0..c {
                    for ky in 0..kh {
                        for kx in 0..kw {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            let ix = (ox * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let xv = x[(ic * h + iy as usize) * w + ix as usize] as f64;
                            let wv = weights[((o * ci + ic) * kh + ky) * kw + kx] as f64;
                            acc += xv * wv;
                        }
                    }
                }
                out[(o * oh + oy) * ow + ox] = acc;
            }
        }
    }
    (out, (co, oh, ow))
}

/// Max pool over valid (unpadded) positions only, so padding can never
/// win. Returns (values, (c, oh, ow)).
pub fn maxpool_ref(
    x: &[f32],
    (c, h, w): (usize, usize, usize),
    k: usize,
    stride: usize,
    pad: usize,
) -> (Vec<f64>, (usize, usize, usize)) {
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = vec![f64::NEG_INFINITY; c * oh * ow];
    for ic in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                for ky in 0..k {
                    for kx in 0..k {
                        let iy = (oy * stride + ky) as isize - pad as isize;
                        let ix = (ox * stride + kx) as isize - pad as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        best = best.max(x[(ic * h + iy as usize) * w + ix as usize] as f64);
                    }
                }
                out[(ic * oh + oy) * ow + ox] = best;
            }
        }
    }
    (out, (c, oh, ow))
}

pub fn batchnorm_ref(
    x: &[f32],
    (c, h, w): (usize, usize, usize),
    gamma: &[f32],
    beta: &[f32],
    mean: &[f32],
    var: &[f32],
    eps: f32,
) -> Vec<f64> {
    let mut out = vec![0.0f64; c * h * w];
    for ic in 0..c {
        for i in 0..h * w {
            let xv = x[ic * h * w + i] as f64;
            out[ic * h * w + i] = gamma[ic] as f64 * (xv - mean[ic] as f64)
                / (var[ic] as f64 + eps as f64).sqrt()
                + beta[ic] as f64;
        }
    }
    out
}

pub fn fc_ref(x: &[f32], weights: &[f32], bias: &[f32], out_dim: usize, in_dim: usize) -> Vec<f64> {
    (0..out_dim)
        .map(|o| {
            let mut acc = bias[o] as f64;
            for j in 0..in_dim {
                acc += weights[o * in_dim + j] as f64 * x[j] as f64;
            }
            acc
        })
        .collect()
}

/// Cyclic Jacobi eigensolver for a symmetric n×n matrix (row-major).
/// Returns eigenvalues in descending order and the matching eigenvectors
/// as rows of an n×n matrix.
pub fn jacobi_eigen(a_in: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = a_in.to_vec();
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let eigvals: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut rows = vec![0.0f64; n * n];
    for (r, &col) in order.iter().enumerate() {
        for i in 0..n {
            rows[r * n + i] = v[i * n + col];
        }
    }
    (eigvals, rows)
}

/// Largest-|coordinate| entry of each row made positive; first index
/// wins ties.
pub fn normalize_row_signs(rows: &mut [f64], n_rows: usize, dim: usize) {
    for r in 0..n_rows {
        let row = &mut rows[r * dim..(r + 1) * dim];
        let mut arg = 0;
        for (i, &x) in row.iter().enumerate().skip(1) {
            if x.abs() > row[arg].abs() {
                arg = i;
            }
        }
        if row[arg] < 0.0 {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
    }
}

/// All-f64 replica of a single-conv shallow head, used as the reference
/// function for finite-difference gradient checks.
pub struct F64Head {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub channels: usize,
    pub pool_k: usize,
    pub pool_s: usize,
    pub fc1_width: usize,
    pub k: usize,
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    pub fc1_w: Vec<f64>,
    pub fc1_b: Vec<f64>,
    pub fc2_w: Vec<f64>,
    pub fc2_b: Vec<f64>,
}

impl F64Head {
    pub fn from_head(h: &ScnnHead) -> Self {
        assert_eq!(h.convs.len(), 1, "replica covers single-conv heads");
        let to64 = |t: &resfeats::Tensor| -> Vec<f64> {
            t.data().iter().map(|&v| v as f64).collect()
        };
        F64Head {
            c_in: h.input_shape[0],
            h: h.input_shape[1],
            w: h.input_shape[2],
            channels: h.convs[0].weights.shape()[0],
            pool_k: h.pool_window,
            pool_s: h.pool_stride,
            fc1_width: h.fc1_bias.len(),
            k: h.fc2_bias.len(),
            conv_w: to64(&h.convs[0].weights),
            conv_b: to64(h.convs[0].bias.as_ref().expect("conv bias")),
            fc1_w: to64(&h.fc1_weight),
            fc1_b: to64(&h.fc1_bias),
            fc2_w: to64(&h.fc2_weight),
            fc2_b: to64(&h.fc2_bias),
        }
    }

    /// Cross-entropy loss of one sample, every step in f64.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        let plane = self.h * self.w;
        let mut conv = vec![0.0f64; self.channels * plane];
        for o in 0..self.channels {
            for i in 0..plane {
                let mut acc = self.conv_b[o];
                for ic in 0..self.c_in {
                    acc += self.conv_w[o * self.c_in + ic] * x[ic * plane + i];
                }
                conv[o * plane + i] = acc;
            }
        }
        let ph = (self.h - self.pool_k) / self.pool_s + 1;
        let pw = (self.w - self.pool_k) / self.pool_s + 1;
        let mut pooled = vec![0.0f64; self.channels * ph * pw];
        for o in 0..self.channels {
            for py in 0..ph {
                for px in 0..pw {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..self.pool_k {
                        for kx in 0..self.pool_k {
                            let iy = py * self.pool_s + ky;
                            let ix = px * self.pool_s + kx;
                            best = best.max(conv[o * plane + iy * self.w + ix]);
                        }
                    }
                    pooled[(o * ph + py) * pw + px] = best;
                }
            }
        }
        let flat_dim = self.channels * ph * pw;
        let mut a1 = vec![0.0f64; self.fc1_width];
        for o in 0..self.fc1_width {
            let mut acc = self.fc1_b[o];
            for j in 0..flat_dim {
                acc += self.fc1_w[o * flat_dim + j] * pooled[j];
            }
            a1[o] = acc.max(0.0);
        }
        let mut logits = vec![0.0f64; self.k];
        for o in 0..self.k {
            let mut acc = self.fc2_b[o];
            for j in 0..self.fc1_width {
                acc += self.fc2_w[o * self.fc1_width + j] * a1[j];
            }
            logits[o] = acc;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
        lse - logits[label]
    }
}
