//! Trainable shallow-CNN head: 1×1 conv to a fixed channel width, max
//! pool, two FC layers, softmax. Trained from random initialization on
//! extracted features by minibatch SGD with momentum.
//!
//! Per-sample gradients compose the public backward kernels in `nn_ops`;
//! training runs an internally batched path (one matrix multiply per
//! layer per minibatch) that agrees with the per-sample kernels and is
//! bit-deterministic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::container::{write_atomic, Container};
use crate::error::{Error, Result};
use crate::nn_ops::{
    conv1x1_backward, conv2d, fc_backward, fc_forward, matmul, maxpool2d, maxpool_backward,
    relu_backward, softmax, softmax_ce, softmax_ce_backward, ConvParams,
};
use crate::svm::sidecar_path;
use crate::tensor::{flatten, relu, reshape, Tensor};

#[derive(Debug, Clone)]
pub struct ScnnConfig {
    /// Conv output channels (512 at full scale).
    pub channels: usize,
    /// Number of stacked 1×1 conv layers; relu between consecutive convs.
    pub conv_layers: usize,
    /// Hidden FC width (4096 at full scale).
    pub fc1_width: usize,
    /// Requested pool window and stride; the window is clamped to the
    /// spatial extent when the feature map is smaller than 2×2.
    pub pool_window: usize,
    pub pool_stride: usize,
}

impl Default for ScnnConfig {
    fn default() -> Self {
        Self { channels: 512, conv_layers: 1, fc1_width: 4096, pool_window: 2, pool_stride: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            weight_decay: 5e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScnnHead {
    /// Stacked 1×1 convs, each stride 1 pad 0 with bias.
    pub convs: Vec<ConvParams>,
    pub fc1_weight: Tensor,
    pub fc1_bias: Tensor,
    pub fc2_weight: Tensor,
    pub fc2_bias: Tensor,
    pub input_shape: [usize; 3],
    /// Effective pool geometry after clamping to the input map.
    pub pool_window: usize,
    pub pool_stride: usize,
    /// Class names in logit order; stringified indices until renamed.
    pub classes: Vec<String>,
}

impl ScnnHead {
    pub fn num_classes(&self) -> usize {
        self.fc2_bias.len()
    }

    pub fn pooled_shape(&self) -> [usize; 3] {
        let [_, h, w] = self.input_shape;
        let c = self.convs.last().expect("at least one conv").weights.shape()[0];
        let ph = (h - self.pool_window) / self.pool_stride + 1;
        let pw = (w - self.pool_window) / self.pool_stride + 1;
        [c, ph, pw]
    }
}

fn he_normal(rng: &mut ChaCha8Rng, fan_in: usize, count: usize) -> Vec<f32> {
    let dist = Normal::new(0.0f32, (2.0 / fan_in as f32).sqrt()).expect("finite std");
    (0..count).map(|_| dist.sample(rng)).collect()
}

/// Builds the default head for one input feature shape.
pub fn scnn_build(input_shape: [usize; 3], num_classes: usize, seed: u64) -> Result<ScnnHead> {
    scnn_build_with(&ScnnConfig::default(), input_shape, num_classes, seed)
}

/// Builds a head with explicit widths and depth. Weights are He-normal
/// from the seed, biases zero; identical seeds give identical heads.
pub fn scnn_build_with(
    cfg: &ScnnConfig,
    input_shape: [usize; 3],
    num_classes: usize,
    seed: u64,
) -> Result<ScnnHead> {
    let [c, h, w] = input_shape;
    if c == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidConfig(format!(
            "input shape {input_shape:?} has a zero extent"
        )));
    }
    if num_classes < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    if cfg.channels == 0 || cfg.conv_layers == 0 || cfg.fc1_width == 0 {
        return Err(Error::InvalidConfig(
            "channels, conv_layers, and fc1_width must be positive".into(),
        ));
    }
    if cfg.pool_window == 0 || cfg.pool_stride == 0 {
        return Err(Error::InvalidConfig("pool window and stride must be positive".into()));
    }
    let pool_window = cfg.pool_window.min(h).min(w);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut convs = Vec::with_capacity(cfg.conv_layers);
    let mut in_c = c;
    for _ in 0..cfg.conv_layers {
        let weights = Tensor::new(
            vec![cfg.channels, in_c, 1, 1],
            he_normal(&mut rng, in_c, cfg.channels * in_c),
        )?;
        convs.push(ConvParams::new(weights, Some(Tensor::zeros(vec![cfg.channels])), 1, 0)?);
        in_c = cfg.channels;
    }

    let ph = (h - pool_window) / cfg.pool_stride + 1;
    let pw = (w - pool_window) / cfg.pool_stride + 1;
    let flat = cfg.channels * ph * pw;
    let fc1_weight = Tensor::new(
        vec![cfg.fc1_width, flat],
        he_normal(&mut rng, flat, cfg.fc1_width * flat),
    )?;
    let fc2_weight = Tensor::new(
        vec![num_classes, cfg.fc1_width],
        he_normal(&mut rng, cfg.fc1_width, num_classes * cfg.fc1_width),
    )?;

    Ok(ScnnHead {
        convs,
        fc1_weight,
        fc1_bias: Tensor::zeros(vec![cfg.fc1_width]),
        fc2_weight,
        fc2_bias: Tensor::zeros(vec![num_classes]),
        input_shape,
        pool_window,
        pool_stride: cfg.pool_stride,
        classes: (0..num_classes).map(|i| i.to_string()).collect(),
    })
}

/// Single-sample forward pass to class logits.
pub fn scnn_forward(h: &ScnnHead, x: &Tensor) -> Result<Tensor> {
    let [c, hh, ww] = h.input_shape;
    if x.shape() != [c, hh, ww] {
        return Err(Error::ShapeMismatch(format!(
            "input shape {:?} does not match head input {:?}",
            x.shape(),
            h.input_shape
        )));
    }
    let mut t = x.clone();
    for (i, conv) in h.convs.iter().enumerate() {
        t = conv2d(&t, conv)?;
        if i + 1 < h.convs.len() {
            t = relu(&t);
        }
    }
    let pooled = maxpool2d(&t, h.pool_window, h.pool_stride, 0)?;
    let flat = flatten(&pooled);
    let a1 = fc_forward(&flat, &h.fc1_weight, &h.fc1_bias)?;
    fc_forward(&relu(&a1), &h.fc2_weight, &h.fc2_bias)
}

/// Predicted class index and softmax probabilities; ties go to the lower
/// class index.
pub fn scnn_predict(h: &ScnnHead, x: &Tensor) -> Result<(usize, Tensor)> {
    let probs = softmax(&scnn_forward(h, x)?)?;
    let mut best = 0;
    for (i, &p) in probs.data().iter().enumerate().skip(1) {
        if p > probs.data()[best] {
            best = i;
        }
    }
    Ok((best, probs))
}

/// Gradients of the cross-entropy loss for one sample, composed from the
/// public backward kernels. Returns (loss, conv grads, fc grads).
#[allow(clippy::type_complexity)]
pub fn scnn_grads(
    h: &ScnnHead,
    x: &Tensor,
    label: usize,
) -> Result<(f32, Vec<(Tensor, Tensor)>, [(Tensor, Tensor); 2])> {
    let [c, hh, ww] = h.input_shape;
    if x.shape() != [c, hh, ww] {
        return Err(Error::ShapeMismatch(format!(
            "input shape {:?} does not match head input {:?}",
            x.shape(),
            h.input_shape
        )));
    }
    // Forward, keeping every intermediate the backward pass needs.
    let mut conv_pre = Vec::with_capacity(h.convs.len());
    let mut t = x.clone();
    for (i, conv) in h.convs.iter().enumerate() {
        let y = conv2d(&t, conv)?;
        conv_pre.push(y.clone());
        t = if i + 1 < h.convs.len() { relu(&y) } else { y };
    }
    let pooled = maxpool2d(&t, h.pool_window, h.pool_stride, 0)?;
    let flat = flatten(&pooled);
    let a1 = fc_forward(&flat, &h.fc1_weight, &h.fc1_bias)?;
    let r1 = relu(&a1);
    let logits = fc_forward(&r1, &h.fc2_weight, &h.fc2_bias)?;
    let (loss, probs) = softmax_ce(&logits, label)?;

    let g_logits = softmax_ce_backward(&probs, label)?;
    let (g_r1, g_fc2w, g_fc2b) = fc_backward(&r1, &h.fc2_weight, &g_logits)?;
    let g_a1 = relu_backward(&a1, &g_r1)?;
    let (g_flat, g_fc1w, g_fc1b) = fc_backward(&flat, &h.fc1_weight, &g_a1)?;
    let g_pooled = reshape(&g_flat, pooled.shape().to_vec())?;
    let mut g = maxpool_backward(&t, h.pool_window, h.pool_stride, 0, &g_pooled)?;

    let mut conv_grads = vec![None; h.convs.len()];
    for i in (0..h.convs.len()).rev() {
        let input = if i == 0 { x.clone() } else { relu(&conv_pre[i - 1]) };
        let (g_in, g_w, g_b) = conv1x1_backward(&input, &h.convs[i], &g)?;
        conv_grads[i] = Some((g_w, g_b.expect("head convs carry biases")));
        if i > 0 {
            g = relu_backward(&conv_pre[i - 1], &g_in)?;
        }
    }
    Ok((
        loss,
        conv_grads.into_iter().map(|g| g.expect("filled")).collect(),
        [(g_fc1w, g_fc1b), (g_fc2w, g_fc2b)],
    ))
}

fn transpose(a: &[f32], rows: usize, cols: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// One parameter tensor with its SGD momentum velocity.
struct Slot {
    value: Vec<f32>,
    velocity: Vec<f64>,
    decay: bool,
}

impl Slot {
    fn new(t: &Tensor, decay: bool) -> Self {
        Slot { value: t.data().to_vec(), velocity: vec![0.0; t.len()], decay }
    }

    fn step(&mut self, grad: &[f32], cfg: &TrainConfig) {
        let wd = if self.decay { cfg.weight_decay } else { 0.0 };
        for i in 0..self.value.len() {
            let g = grad[i] as f64 + wd * self.value[i] as f64;
            self.velocity[i] = cfg.momentum * self.velocity[i] - cfg.learning_rate * g;
            self.value[i] = (self.value[i] as f64 + self.velocity[i]) as f32;
        }
    }
}

/// Minibatch SGD with momentum on softmax cross-entropy. `features` is
/// rows × (C·H·W) with each row a flattened feature map. Returns the
/// trained head and the per-epoch mean loss.
pub fn scnn_train(
    h: &ScnnHead,
    features: &Tensor,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(ScnnHead, Vec<f32>)> {
    let (rows, dim) = features.dims2()?;
    let [c, hh, ww] = h.input_shape;
    if dim != c * hh * ww {
        return Err(Error::ShapeMismatch(format!(
            "feature dimension {dim} does not match head input {:?}",
            h.input_shape
        )));
    }
    if rows == 0 {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if rows != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{rows} feature rows but {} labels",
            labels.len()
        )));
    }
    let k = h.num_classes();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} out of range for {k} classes"
        )));
    }
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::InvalidConfig("learning_rate must be finite and nonnegative".into()));
    }
    if !(0.0..1.0).contains(&cfg.momentum) || cfg.weight_decay < 0.0 {
        return Err(Error::InvalidConfig(
            "momentum must be in [0,1) and weight_decay nonnegative".into(),
        ));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidConfig("batch_size and epochs must be positive".into()));
    }

    let mut conv_w: Vec<Slot> = h.convs.iter().map(|cv| Slot::new(&cv.weights, true)).collect();
    let mut conv_b: Vec<Slot> = h
        .convs
        .iter()
        .map(|cv| Slot::new(cv.bias.as_ref().expect("head convs carry biases"), false))
        .collect();
    let mut fc1_w = Slot::new(&h.fc1_weight, true);
    let mut fc1_b = Slot::new(&h.fc1_bias, false);
    let mut fc2_w = Slot::new(&h.fc2_weight, true);
    let mut fc2_b = Slot::new(&h.fc2_bias, false);

    let plane = hh * ww;
    let channels = h.convs.last().expect("conv").weights.shape()[0];
    let [pc, ph, pw] = h.pooled_shape();
    let pooled_dim = pc * ph * pw;
    let fc1_width = h.fc1_bias.len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;

        for batch in order.chunks(cfg.batch_size) {
            let b = batch.len();

            // Conv stage in channel-major layout [C, b·plane]; column
            // index = sample·plane + spatial.
            let mut x_all = vec![0.0f32; c * b * plane];
            for (bi, &row) in batch.iter().enumerate() {
                let src = &features.data()[row * dim..(row + 1) * dim];
                for ci in 0..c {
                    let dst = &mut x_all[ci * b * plane + bi * plane..][..plane];
                    dst.copy_from_slice(&src[ci * plane..(ci + 1) * plane]);
                }
            }

            let mut conv_inputs = Vec::with_capacity(conv_w.len());
            let mut conv_pre = Vec::with_capacity(conv_w.len());
            let mut cur = x_all;
            let mut cur_c = c;
            for (li, w) in conv_w.iter().enumerate() {
                let out_c = channels;
                let mut y = matmul(&w.value, &cur, out_c, cur_c, b * plane);
                for (o, &bias) in conv_b[li].value.iter().enumerate() {
                    for v in &mut y[o * b * plane..(o + 1) * b * plane] {
                        *v += bias;
                    }
                }
                conv_inputs.push(cur);
                conv_pre.push(y.clone());
                if li + 1 < conv_w.len() {
                    for v in &mut y {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                cur = y;
                cur_c = out_c;
            }

            // Pool each sample; pooled rows are sample-major [b, pooled_dim].
            let mut pooled = vec![f32::NEG_INFINITY; b * pooled_dim];
            let mut argmax = vec![0usize; b * pooled_dim];
            for bi in 0..b {
                for ci in 0..channels {
                    let chan = &cur[ci * b * plane + bi * plane..][..plane];
                    for py in 0..ph {
                        for px in 0..pw {
                            let mut best = f32::NEG_INFINITY;
                            let mut arg = 0usize;
                            for ky in 0..h.pool_window {
                                for kx in 0..h.pool_window {
                                    let iy = py * h.pool_stride + ky;
                                    let ix = px * h.pool_stride + kx;
                                    let v = chan[iy * ww + ix];
                                    if v > best {
                                        best = v;
                                        arg = iy * ww + ix;
                                    }
                                }
                            }
                            let oi = bi * pooled_dim + (ci * ph + py) * pw + px;
                            pooled[oi] = best;
                            argmax[oi] = arg;
                        }
                    }
                }
            }

            // FC stage, sample-major.
            let w1t = transpose(&fc1_w.value, fc1_width, pooled_dim);
            let mut a1 = matmul(&pooled, &w1t, b, pooled_dim, fc1_width);
            for bi in 0..b {
                for (j, &bias) in fc1_b.value.iter().enumerate() {
                    a1[bi * fc1_width + j] += bias;
                }
            }
            let r1: Vec<f32> = a1.iter().map(|&v| v.max(0.0)).collect();
            let w2t = transpose(&fc2_w.value, k, fc1_width);
            let mut logits = matmul(&r1, &w2t, b, fc1_width, k);
            for bi in 0..b {
                for (j, &bias) in fc2_b.value.iter().enumerate() {
                    logits[bi * k + j] += bias;
                }
            }

            // Softmax-CE per row; gradient rows pre-divided by the batch
            // size so downstream grads are batch means.
            let mut g_logits = vec![0.0f32; b * k];
            for bi in 0..b {
                let row = Tensor::new(vec![k], logits[bi * k..(bi + 1) * k].to_vec())?;
                let (loss, probs) = softmax_ce(&row, labels[batch[bi]])?;
                epoch_loss += loss as f64;
                let g = softmax_ce_backward(&probs, labels[batch[bi]])?;
                for j in 0..k {
                    g_logits[bi * k + j] = g.data()[j] / b as f32;
                }
            }

            // fc2 backward.
            let g_logits_t = transpose(&g_logits, b, k);
            let g_w2 = matmul(&g_logits_t, &r1, k, b, fc1_width);
            let mut g_b2 = vec![0.0f32; k];
            for j in 0..k {
                let mut acc = 0.0f64;
                for bi in 0..b {
                    acc += g_logits[bi * k + j] as f64;
                }
                g_b2[j] = acc as f32;
            }
            let mut g_r1 = matmul(&g_logits, &fc2_w.value, b, k, fc1_width);
            for (g, &pre) in g_r1.iter_mut().zip(&a1) {
                if pre <= 0.0 {
                    *g = 0.0;
                }
            }

            // fc1 backward.
            let g_a1_t = transpose(&g_r1, b, fc1_width);
            let g_w1 = matmul(&g_a1_t, &pooled, fc1_width, b, pooled_dim);
            let mut g_b1 = vec![0.0f32; fc1_width];
            for j in 0..fc1_width {
                let mut acc = 0.0f64;
                for bi in 0..b {
                    acc += g_r1[bi * fc1_width + j] as f64;
                }
                g_b1[j] = acc as f32;
            }
            let g_pooled = matmul(&g_r1, &fc1_w.value, b, fc1_width, pooled_dim);

            // Pool backward into channel-major layout.
            let mut g_conv = vec![0.0f32; channels * b * plane];
            for bi in 0..b {
                for ci in 0..channels {
                    for pi in 0..ph * pw {
                        let oi = bi * pooled_dim + ci * ph * pw + pi;
                        g_conv[ci * b * plane + bi * plane + argmax[oi]] += g_pooled[oi];
                    }
                }
            }

            // Conv backward through the stack.
            let mut g_cur = g_conv;
            for li in (0..conv_w.len()).rev() {
                let in_c = if li == 0 { c } else { channels };
                // Inputs were stored pre-relu for layers after the first.
                let input: Vec<f32> = if li == 0 {
                    conv_inputs[0].clone()
                } else {
                    conv_pre[li - 1].iter().map(|&v| v.max(0.0)).collect()
                };
                let input_t = transpose(&input, in_c, b * plane);
                let g_w = matmul(&g_cur, &input_t, channels, b * plane, in_c);
                let mut g_b = vec![0.0f32; channels];
                for o in 0..channels {
                    let mut acc = 0.0f64;
                    for &v in &g_cur[o * b * plane..(o + 1) * b * plane] {
                        acc += v as f64;
                    }
                    g_b[o] = acc as f32;
                }
                if li > 0 {
                    let w_t = transpose(&conv_w[li].value, channels, in_c);
                    let mut g_in = matmul(&w_t, &g_cur, in_c, channels, b * plane);
                    for (g, &pre) in g_in.iter_mut().zip(&conv_pre[li - 1]) {
                        if pre <= 0.0 {
                            *g = 0.0;
                        }
                    }
                    g_cur = g_in;
                }
                conv_w[li].step(&g_w, cfg);
                conv_b[li].step(&g_b, cfg);
            }
            fc1_w.step(&g_w1, cfg);
            fc1_b.step(&g_b1, cfg);
            fc2_w.step(&g_w2, cfg);
            fc2_b.step(&g_b2, cfg);
        }
        curve.push((epoch_loss / rows as f64) as f32);
    }

    let mut trained = h.clone();
    for (li, conv) in trained.convs.iter_mut().enumerate() {
        conv.weights = Tensor::new(conv.weights.shape().to_vec(), conv_w[li].value.clone())?;
        conv.bias = Some(Tensor::new(vec![channels], conv_b[li].value.clone())?);
    }
    trained.fc1_weight = Tensor::new(trained.fc1_weight.shape().to_vec(), fc1_w.value)?;
    trained.fc1_bias = Tensor::new(vec![fc1_width], fc1_b.value)?;
    trained.fc2_weight = Tensor::new(trained.fc2_weight.shape().to_vec(), fc2_w.value)?;
    trained.fc2_bias = Tensor::new(vec![k], fc2_b.value)?;
    Ok((trained, curve))
}

/// Writes the head as an RFT1 container plus a `<path>.meta` sidecar
/// carrying the classes, input shape, and layer widths.
pub fn save_scnn(h: &ScnnHead, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for class in &h.classes {
        if class.contains(',') || class.contains('\n') {
            return Err(Error::InvalidConfig(format!(
                "class name {class:?} may not contain commas or newlines"
            )));
        }
    }
    let mut c = Container::new();
    for (i, conv) in h.convs.iter().enumerate() {
        let prefix = if i == 0 { "scnn.conv".to_string() } else { format!("scnn.conv{}", i + 1) };
        c.insert(format!("{prefix}.weight"), conv.weights.clone());
        c.insert(
            format!("{prefix}.bias"),
            conv.bias.as_ref().expect("head convs carry biases").clone(),
        );
    }
    c.insert("scnn.fc1.weight", h.fc1_weight.clone());
    c.insert("scnn.fc1.bias", h.fc1_bias.clone());
    c.insert("scnn.fc2.weight", h.fc2_weight.clone());
    c.insert("scnn.fc2.bias", h.fc2_bias.clone());
    c.write(path)?;
    let meta = format!(
        "kind=scnn\nclasses={}\ninput_shape={},{},{}\nchannels={}\nconv_layers={}\nfc1_width={}\npool_window={}\npool_stride={}\n",
        h.classes.join(","),
        h.input_shape[0],
        h.input_shape[1],
        h.input_shape[2],
        h.convs.last().expect("conv").weights.shape()[0],
        h.convs.len(),
        h.fc1_bias.len(),
        h.pool_window,
        h.pool_stride,
    );
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

pub fn load_scnn(path: impl AsRef<Path>) -> Result<ScnnHead> {
    let path = path.as_ref();
    let c = Container::read(path)?;
    let meta = std::fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::MetaMismatch(format!("missing sidecar {}: {e}", sidecar_path(path).display()))
    })?;
    let mut fields = std::collections::HashMap::new();
    for line in meta.lines() {
        if let Some((k, v)) = line.trim().split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    if fields.get("kind").map(String::as_str) != Some("scnn") {
        return Err(Error::MetaMismatch("sidecar kind is not \"scnn\"".into()));
    }
    let get = |k: &str| -> Result<&String> {
        fields.get(k).ok_or_else(|| Error::MetaMismatch(format!("sidecar lacks {k}")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?.parse().map_err(|_| Error::MetaMismatch(format!("bad {k} value")))
    };
    let classes: Vec<String> = get("classes")?.split(',').map(str::to_string).collect();
    let shape_parts: Vec<usize> = get("input_shape")?
        .split(',')
        .map(|p| p.parse().map_err(|_| Error::MetaMismatch("bad input_shape".into())))
        .collect::<Result<_>>()?;
    if shape_parts.len() != 3 {
        return Err(Error::MetaMismatch("input_shape must have 3 extents".into()));
    }
    let cfg = ScnnConfig {
        channels: parse_usize("channels")?,
        conv_layers: parse_usize("conv_layers")?,
        fc1_width: parse_usize("fc1_width")?,
        pool_window: parse_usize("pool_window")?,
        pool_stride: parse_usize("pool_stride")?,
    };
    let mut h = scnn_build_with(
        &cfg,
        [shape_parts[0], shape_parts[1], shape_parts[2]],
        classes.len().max(2),
        0,
    )?;
    if classes.len() < 2 {
        return Err(Error::MetaMismatch("sidecar lists fewer than 2 classes".into()));
    }
    h.classes = classes;

    let mut expected = Vec::new();
    for (i, conv) in h.convs.iter_mut().enumerate() {
        let prefix = if i == 0 { "scnn.conv".to_string() } else { format!("scnn.conv{}", i + 1) };
        let w = c.require(&format!("{prefix}.weight"))?;
        if w.shape() != conv.weights.shape() {
            return Err(Error::ShapeMismatch(format!(
                "entry \"{prefix}.weight\" has shape {:?}, head expects {:?}",
                w.shape(),
                conv.weights.shape()
            )));
        }
        conv.weights = w.clone();
        let b = c.require(&format!("{prefix}.bias"))?;
        if b.shape() != [w.shape()[0]] {
            return Err(Error::ShapeMismatch(format!(
                "entry \"{prefix}.bias\" has shape {:?}",
                b.shape()
            )));
        }
        conv.bias = Some(b.clone());
        expected.push(format!("{prefix}.weight"));
        expected.push(format!("{prefix}.bias"));
    }
    for (name, slot) in [
        ("scnn.fc1.weight", &mut h.fc1_weight),
        ("scnn.fc1.bias", &mut h.fc1_bias),
        ("scnn.fc2.weight", &mut h.fc2_weight),
        ("scnn.fc2.bias", &mut h.fc2_bias),
    ] {
        let t = c.require(name)?;
        if t.shape() != slot.shape() {
            return Err(Error::ShapeMismatch(format!(
                "entry {name:?} has shape {:?}, head expects {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t.clone();
        expected.push(name.to_string());
    }
    if c.len() != expected.len() {
        let extra: Vec<&str> = c.names().filter(|n| !expected.iter().any(|e| e == n)).collect();
        return Err(Error::UnexpectedTensor(format!(
            "container holds entries the head does not use: {extra:?}"
        )));
    }
    Ok(h)
}
