//! Residual network construction, forward inference, and feature taps.
//!
//! Builds ResNet-50 and ResNet-152 with the standard four-stage
//! bottleneck layout, plus a configurable mini variant with the same
//! topology at desk-testable size. Features are tapped at the post-relu
//! output of the last block of stages 2, 3, and 4 (Res3d, Res4f, Res5c).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::container::Container;
use crate::error::{Error, Result};
use crate::nn_ops::{
    batchnorm_infer, conv2d, fc_forward, global_avgpool, maxpool2d, BatchNormParams, ConvParams,
};
use crate::tensor::{add, relu, Tensor};

/// Batch norm epsilon used everywhere; not serialized.
pub const BN_EPSILON: f32 = 1e-5;

/// Network architecture selector.
///
/// `Mini` keeps the 4-stage, stride-2-per-stage bottleneck topology at a
/// reduced width and depth; `widths` are the stage *output* channel
/// counts (each 4x its bottleneck width, so they must be divisible by 4).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    ResNet50,
    ResNet152,
    Mini { widths: [usize; 4], depths: [usize; 4] },
}

impl Variant {
    /// The default desk-scale variant: 3x32x32 input yields a 128x1x1
    /// final map.
    pub fn mini_default() -> Self {
        Variant::Mini { widths: [16, 32, 64, 128], depths: [1, 1, 1, 1] }
    }

    /// Stage output channel counts (after the 4x bottleneck expansion).
    pub fn stage_out_channels(&self) -> [usize; 4] {
        match self {
            Variant::ResNet50 | Variant::ResNet152 => [256, 512, 1024, 2048],
            Variant::Mini { widths, .. } => *widths,
        }
    }

    /// Blocks per stage.
    pub fn stage_depths(&self) -> [usize; 4] {
        match self {
            Variant::ResNet50 => [3, 4, 6, 3],
            Variant::ResNet152 => [3, 8, 36, 3],
            Variant::Mini { depths, .. } => *depths,
        }
    }

    /// Stem output channels; equals the first stage's bottleneck width.
    pub fn stem_channels(&self) -> usize {
        self.stage_out_channels()[0] / 4
    }

    fn validate(&self) -> Result<()> {
        if let Variant::Mini { widths, depths } = self {
            if widths.iter().any(|&w| w == 0 || w % 4 != 0) {
                return Err(Error::InvalidConfig(format!(
                    "mini stage widths must be positive multiples of 4, got {widths:?}"
                )));
            }
            if depths.iter().any(|&d| d == 0) {
                return Err(Error::InvalidConfig(format!(
                    "mini stage depths must be positive, got {depths:?}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::ResNet50 => write!(f, "resnet50"),
            Variant::ResNet152 => write!(f, "resnet152"),
            Variant::Mini { .. } => write!(f, "mini"),
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "resnet50" => Ok(Variant::ResNet50),
            "resnet152" => Ok(Variant::ResNet152),
            "mini" => Ok(Variant::mini_default()),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant {other:?}; expected resnet50, resnet152, or mini"
            ))),
        }
    }
}

/// Feature tap points: the outputs of the last residual block of stages
/// 2, 3, and 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TapName {
    Res3d,
    Res4f,
    Res5c,
}

impl TapName {
    pub const ALL: [TapName; 3] = [TapName::Res3d, TapName::Res4f, TapName::Res5c];

    /// 1-based stage whose last block this tap reads.
    pub fn stage(&self) -> usize {
        match self {
            TapName::Res3d => 2,
            TapName::Res4f => 3,
            TapName::Res5c => 4,
        }
    }

    /// Channel count of this tap under the given variant
    /// (512 / 1024 / 2048 for the full-size networks).
    pub fn channels(&self, variant: &Variant) -> usize {
        variant.stage_out_channels()[self.stage() - 1]
    }
}

impl fmt::Display for TapName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapName::Res3d => write!(f, "res3d"),
            TapName::Res4f => write!(f, "res4f"),
            TapName::Res5c => write!(f, "res5c"),
        }
    }
}

impl FromStr for TapName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "res3d" => Ok(TapName::Res3d),
            "res4f" => Ok(TapName::Res4f),
            "res5c" => Ok(TapName::Res5c),
            other => Err(Error::InvalidConfig(format!(
                "unknown tap {other:?}; expected res3d, res4f, or res5c"
            ))),
        }
    }
}

/// Residual branch shortcut: identity when shapes agree, 1x1 projection
/// (conv + bn) when channels or stride change.
#[derive(Debug, Clone)]
pub enum Shortcut {
    Identity,
    Projection { conv: ConvParams, bn: BatchNormParams },
}

/// Three-convolution bottleneck block: 1x1 reduce, 3x3, 1x1 expand, each
/// followed by batch norm; relu between, and after the shortcut addition.
/// `stride` applies in the 3x3 conv and the projection.
#[derive(Debug, Clone)]
pub struct BottleneckBlock {
    pub conv_a: ConvParams,
    pub bn_a: BatchNormParams,
    pub conv_b: ConvParams,
    pub bn_b: BatchNormParams,
    pub conv_c: ConvParams,
    pub bn_c: BatchNormParams,
    pub shortcut: Shortcut,
    pub stride: usize,
}

/// 7x7 stride-2 conv + bn (relu and the 3x3 stride-2 max pool are applied
/// in the forward pass).
#[derive(Debug, Clone)]
pub struct Stem {
    pub conv: ConvParams,
    pub bn: BatchNormParams,
}

/// Classifier head: global average pool then one FC layer.
#[derive(Debug, Clone)]
pub struct Head {
    pub fc_weight: Tensor,
    pub fc_bias: Tensor,
}

#[derive(Debug, Clone)]
pub struct ResNetModel {
    pub variant: Variant,
    pub stem: Stem,
    pub stages: Vec<Vec<BottleneckBlock>>,
    pub head: Head,
    /// Tap name -> 1-based stage index whose last block it reads.
    pub taps: BTreeMap<TapName, usize>,
}

/// out = relu( shortcut(x) + bn_c(conv_c(relu(bn_b(conv_b(relu(bn_a(conv_a(x)))))))) )
pub fn block_forward(x: &Tensor, b: &BottleneckBlock) -> Result<Tensor> {
    let t = relu(&batchnorm_infer(&conv2d(x, &b.conv_a)?, &b.bn_a)?);
    let t = relu(&batchnorm_infer(&conv2d(&t, &b.conv_b)?, &b.bn_b)?);
    let branch = batchnorm_infer(&conv2d(&t, &b.conv_c)?, &b.bn_c)?;
    let carried = match &b.shortcut {
        Shortcut::Identity => add(x, &branch)?,
        Shortcut::Projection { conv, bn } => {
            add(&batchnorm_infer(&conv2d(x, conv)?, bn)?, &branch)?
        }
    };
    Ok(relu(&carried))
}

fn he_conv(
    rng: &mut ChaCha8Rng,
    out_c: usize,
    in_c: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> Result<ConvParams> {
    let fan_in = (in_c * k * k) as f32;
    let dist = Normal::new(0.0f32, (2.0 / fan_in).sqrt()).expect("finite std");
    let data: Vec<f32> = (0..out_c * in_c * k * k).map(|_| dist.sample(rng)).collect();
    ConvParams::new(Tensor::new(vec![out_c, in_c, k, k], data)?, None, stride, padding)
}

/// Builds a model with seeded He-normal conv weights, identity batch
/// norms, and a zero-bias random FC head. Fully deterministic in `seed`.
pub fn build_resnet(variant: &Variant, num_classes: usize, seed: u64) -> Result<ResNetModel> {
    variant.validate()?;
    if num_classes == 0 {
        return Err(Error::InvalidConfig("num_classes must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = variant.stage_out_channels();
    let depths = variant.stage_depths();
    let stem_c = variant.stem_channels();

    let stem = Stem {
        conv: he_conv(&mut rng, stem_c, 3, 7, 2, 3)?,
        bn: BatchNormParams::identity(stem_c),
    };

    let mut stages = Vec::with_capacity(4);
    let mut in_c = stem_c;
    for s in 0..4 {
        let out_c = widths[s];
        let mid_c = out_c / 4;
        let mut blocks = Vec::with_capacity(depths[s]);
        for b in 0..depths[s] {
            let stride = if s > 0 && b == 0 { 2 } else { 1 };
            let shortcut = if b == 0 {
                // First block changes channels (and usually stride).
                Shortcut::Projection {
                    conv: he_conv(&mut rng, out_c, in_c, 1, stride, 0)?,
                    bn: BatchNormParams::identity(out_c),
                }
            } else {
                Shortcut::Identity
            };
            blocks.push(BottleneckBlock {
                conv_a: he_conv(&mut rng, mid_c, in_c, 1, 1, 0)?,
                bn_a: BatchNormParams::identity(mid_c),
                conv_b: he_conv(&mut rng, mid_c, mid_c, 3, stride, 1)?,
                bn_b: BatchNormParams::identity(mid_c),
                conv_c: he_conv(&mut rng, out_c, mid_c, 1, 1, 0)?,
                bn_c: BatchNormParams::identity(out_c),
                shortcut,
                stride,
            });
            in_c = out_c;
        }
        stages.push(blocks);
    }

    let last_c = widths[3];
    let dist = Normal::new(0.0f32, (2.0 / last_c as f32).sqrt()).expect("finite std");
    let head = Head {
        fc_weight: Tensor::new(
            vec![num_classes, last_c],
            (0..num_classes * last_c).map(|_| dist.sample(&mut rng)).collect(),
        )?,
        fc_bias: Tensor::zeros(vec![num_classes]),
    };

    let taps = TapName::ALL.iter().map(|&t| (t, t.stage())).collect();
    Ok(ResNetModel { variant: variant.clone(), stem, stages, head, taps })
}

impl ResNetModel {
    pub fn num_classes(&self) -> usize {
        self.head.fc_bias.len()
    }

    fn stem_forward(&self, image: &Tensor) -> Result<Tensor> {
        let (c, h, w) = image.dims3()?;
        if c != 3 {
            return Err(Error::ShapeMismatch(format!(
                "expected a 3-channel image, got {c} channels"
            )));
        }
        if h < 32 || w < 32 {
            return Err(Error::InvalidConfig(format!(
                "input {h}x{w} is below the 32x32 geometry minimum"
            )));
        }
        let t = relu(&batchnorm_infer(&conv2d(image, &self.stem.conv)?, &self.stem.bn)?);
        maxpool2d(&t, 3, 2, 1)
    }

    /// Runs the body and returns the post-relu output of the last block
    /// of each requested stage. The classifier head is not evaluated.
    pub fn forward_with_taps(
        &self,
        image: &Tensor,
        taps: &[TapName],
    ) -> Result<BTreeMap<TapName, Tensor>> {
        if taps.is_empty() {
            return Err(Error::InvalidConfig("no taps requested".into()));
        }
        let deepest = taps.iter().map(|t| self.taps[t]).max().unwrap();
        let mut out = BTreeMap::new();
        let mut x = self.stem_forward(image)?;
        for (si, blocks) in self.stages.iter().enumerate().take(deepest) {
            for b in blocks {
                x = block_forward(&x, b)?;
            }
            for &t in taps {
                if self.taps[&t] == si + 1 {
                    out.insert(t, x.clone());
                }
            }
        }
        Ok(out)
    }

    /// Full forward pass through the classifier head.
    pub fn forward_logits(&self, image: &Tensor) -> Result<Tensor> {
        let mut x = self.stem_forward(image)?;
        for blocks in &self.stages {
            for b in blocks {
                x = block_forward(&x, b)?;
            }
        }
        let pooled = global_avgpool(&x)?;
        fc_forward(&pooled, &self.head.fc_weight, &self.head.fc_bias)
    }

    /// Serializes every parameter under the documented naming scheme.
    pub fn to_container(&self) -> Container {
        let mut c = Container::new();
        c.insert("stem.conv.weight", self.stem.conv.weights.clone());
        insert_bn(&mut c, "stem.bn", &self.stem.bn);
        for (si, blocks) in self.stages.iter().enumerate() {
            for (bi, b) in blocks.iter().enumerate() {
                let p = format!("stage{}.block{}", si + 1, bi + 1);
                c.insert(format!("{p}.conva.weight"), b.conv_a.weights.clone());
                insert_bn(&mut c, &format!("{p}.bn_a"), &b.bn_a);
                c.insert(format!("{p}.convb.weight"), b.conv_b.weights.clone());
                insert_bn(&mut c, &format!("{p}.bn_b"), &b.bn_b);
                c.insert(format!("{p}.convc.weight"), b.conv_c.weights.clone());
                insert_bn(&mut c, &format!("{p}.bn_c"), &b.bn_c);
                if let Shortcut::Projection { conv, bn } = &b.shortcut {
                    c.insert(format!("{p}.shortcut.conv.weight"), conv.weights.clone());
                    insert_bn(&mut c, &format!("{p}.shortcut.bn"), bn);
                }
            }
        }
        c.insert("head.fc.weight", self.head.fc_weight.clone());
        c.insert("head.fc.bias", self.head.fc_bias.clone());
        c
    }

    /// Returns a copy of this architecture with every parameter bound
    /// from the container. Rejects missing entries, extra entries, and
    /// shape disagreements, naming the offending entry.
    pub fn load_weights(&self, c: &Container) -> Result<ResNetModel> {
        let mut model = self.clone();
        let mut seen: Vec<String> = Vec::new();

        take_conv(c, "stem.conv.weight", &mut model.stem.conv, &mut seen)?;
        take_bn(c, "stem.bn", &mut model.stem.bn, &mut seen)?;
        for (si, blocks) in model.stages.iter_mut().enumerate() {
            for (bi, b) in blocks.iter_mut().enumerate() {
                let p = format!("stage{}.block{}", si + 1, bi + 1);
                take_conv(c, &format!("{p}.conva.weight"), &mut b.conv_a, &mut seen)?;
                take_bn(c, &format!("{p}.bn_a"), &mut b.bn_a, &mut seen)?;
                take_conv(c, &format!("{p}.convb.weight"), &mut b.conv_b, &mut seen)?;
                take_bn(c, &format!("{p}.bn_b"), &mut b.bn_b, &mut seen)?;
                take_conv(c, &format!("{p}.convc.weight"), &mut b.conv_c, &mut seen)?;
                take_bn(c, &format!("{p}.bn_c"), &mut b.bn_c, &mut seen)?;
                if let Shortcut::Projection { conv, bn } = &mut b.shortcut {
                    take_conv(c, &format!("{p}.shortcut.conv.weight"), conv, &mut seen)?;
                    take_bn(c, &format!("{p}.shortcut.bn"), bn, &mut seen)?;
                }
            }
        }
        take_tensor(c, "head.fc.weight", &mut model.head.fc_weight, &mut seen)?;
        take_tensor(c, "head.fc.bias", &mut model.head.fc_bias, &mut seen)?;

        if c.len() != seen.len() {
            let extra: Vec<&str> = c.names().filter(|n| !seen.iter().any(|s| s == n)).collect();
            return Err(Error::UnexpectedTensor(format!(
                "container holds entries this architecture does not use: {extra:?}"
            )));
        }
        Ok(model)
    }

    /// Builds the architecture for `variant`, inferring the class count
    /// from the container's head, then binds all weights.
    pub fn from_container(variant: &Variant, c: &Container) -> Result<ResNetModel> {
        let num_classes = c.require("head.fc.bias")?.len();
        build_resnet(variant, num_classes, 0)?.load_weights(c)
    }
}

fn insert_bn(c: &mut Container, prefix: &str, bn: &BatchNormParams) {
    c.insert(format!("{prefix}.gamma"), bn.gamma.clone());
    c.insert(format!("{prefix}.beta"), bn.beta.clone());
    c.insert(format!("{prefix}.mean"), bn.running_mean.clone());
    c.insert(format!("{prefix}.var"), bn.running_var.clone());
}

fn take_tensor(c: &Container, name: &str, slot: &mut Tensor, seen: &mut Vec<String>) -> Result<()> {
    let t = c.require(name)?;
    if t.shape() != slot.shape() {
        return Err(Error::ShapeMismatch(format!(
            "entry {name:?} has shape {:?}, architecture expects {:?}",
            t.shape(),
            slot.shape()
        )));
    }
    *slot = t.clone();
    seen.push(name.to_string());
    Ok(())
}

fn take_conv(c: &Container, name: &str, slot: &mut ConvParams, seen: &mut Vec<String>) -> Result<()> {
    let mut w = slot.weights.clone();
    take_tensor(c, name, &mut w, seen)?;
    slot.weights = w;
    Ok(())
}

fn take_bn(c: &Container, prefix: &str, slot: &mut BatchNormParams, seen: &mut Vec<String>) -> Result<()> {
    take_tensor(c, &format!("{prefix}.gamma"), &mut slot.gamma, seen)?;
    take_tensor(c, &format!("{prefix}.beta"), &mut slot.beta, seen)?;
    take_tensor(c, &format!("{prefix}.mean"), &mut slot.running_mean, seen)?;
    take_tensor(c, &format!("{prefix}.var"), &mut slot.running_var, seen)?;
    if slot.running_var.data().iter().any(|&v| v < 0.0) {
        return Err(Error::CorruptFile(format!(
            "entry \"{prefix}.var\" has a negative variance"
        )));
    }
    Ok(())
}

/// Predicts the (channels, height, width) of a tap from the geometry
/// formula alone, without running the network.
pub fn tap_shape(variant: &Variant, tap: TapName, h: usize, w: usize) -> Result<(usize, usize, usize)> {
    let conv_out = |x: usize, k: usize, s: usize, p: usize| -> Result<usize> {
        let span = x + 2 * p;
        if k > span {
            return Err(Error::InvalidGeometry(format!(
                "window {k} does not fit extent {x} with padding {p}"
            )));
        }
        Ok((span - k) / s + 1)
    };
    let mut hh = conv_out(h, 7, 2, 3)?;
    let mut ww = conv_out(w, 7, 2, 3)?;
    hh = conv_out(hh, 3, 2, 1)?;
    ww = conv_out(ww, 3, 2, 1)?;
    for s in 2..=tap.stage() {
        let _ = s;
        hh = conv_out(hh, 3, 2, 1)?;
        ww = conv_out(ww, 3, 2, 1)?;
    }
    Ok((tap.channels(variant), hh, ww))
}
