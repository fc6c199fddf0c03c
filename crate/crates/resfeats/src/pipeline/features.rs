//! Extracted-feature cache: a samples × n matrix, labels, and the
//! metadata that makes a cache reproducible. Tensors go in an RFT1
//! container; metadata goes in a `<path>.meta` text sidecar.

use std::path::Path;

use crate::container::{write_atomic, Container};
use crate::error::{Error, Result};
use crate::svm::sidecar_path;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMeta {
    pub variant: String,
    pub tap: String,
    /// Preprocessing descriptor: resize target and channel means.
    pub size: usize,
    pub mean: [f32; 3],
    /// Reduction descriptor, e.g. "none" or "pca(16)".
    pub reduction: String,
    pub augment16: bool,
    /// Class names; labels index into this list.
    pub classes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct FeatureSet {
    /// rows × n feature matrix.
    pub features: Tensor,
    /// Class index per row.
    pub labels: Vec<usize>,
    pub meta: FeatureMeta,
}

impl FeatureSet {
    pub fn new(features: Tensor, labels: Vec<usize>, meta: FeatureMeta) -> Result<Self> {
        let (rows, _) = features.dims2()?;
        if rows != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows} feature rows but {} labels",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= meta.classes.len()) {
            return Err(Error::IndexOutOfRange(format!(
                "label {bad} out of range for {} classes",
                meta.classes.len()
            )));
        }
        Ok(FeatureSet { features, labels, meta })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.features.shape()[1]
    }

    /// One feature row as a vector tensor.
    pub fn row(&self, i: usize) -> Result<Tensor> {
        let (rows, n) = self.features.dims2()?;
        if i >= rows {
            return Err(Error::IndexOutOfRange(format!("row {i} of {rows}")));
        }
        Tensor::new(vec![n], self.features.data()[i * n..(i + 1) * n].to_vec())
    }
}

pub fn save_features(fs: &FeatureSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for class in &fs.meta.classes {
        if class.contains(',') || class.contains('\n') {
            return Err(Error::InvalidConfig(format!(
                "class name {class:?} may not contain commas or newlines"
            )));
        }
    }
    let (rows, dim) = fs.features.dims2()?;
    let mut c = Container::new();
    c.insert("features", fs.features.clone());
    c.insert(
        "labels",
        Tensor::new(vec![rows.max(1)], {
            // Labels ride in the f32 container; exact below 2^24.
            let mut v: Vec<f32> = fs.labels.iter().map(|&l| l as f32).collect();
            if v.is_empty() {
                v.push(0.0);
            }
            v
        })?,
    );
    c.write(path)?;
    let meta = format!(
        "kind=features\nrows={rows}\ndim={dim}\nvariant={}\ntap={}\nsize={}\nmean={}:{}:{}\nreduction={}\naugment16={}\nclasses={}\n",
        fs.meta.variant,
        fs.meta.tap,
        fs.meta.size,
        fs.meta.mean[0],
        fs.meta.mean[1],
        fs.meta.mean[2],
        fs.meta.reduction,
        fs.meta.augment16,
        fs.meta.classes.join(","),
    );
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSet> {
    let path = path.as_ref();
    let c = Container::read(path)?;
    let meta_text = std::fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::MetaMismatch(format!("missing sidecar {}: {e}", sidecar_path(path).display()))
    })?;
    let mut fields = std::collections::HashMap::new();
    for line in meta_text.lines() {
        if let Some((k, v)) = line.trim().split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    if fields.get("kind").map(String::as_str) != Some("features") {
        return Err(Error::MetaMismatch("sidecar kind is not \"features\"".into()));
    }
    let get = |k: &str| -> Result<&String> {
        fields.get(k).ok_or_else(|| Error::MetaMismatch(format!("sidecar lacks {k}")))
    };
    let rows: usize =
        get("rows")?.parse().map_err(|_| Error::MetaMismatch("bad rows value".into()))?;
    let dim: usize =
        get("dim")?.parse().map_err(|_| Error::MetaMismatch("bad dim value".into()))?;
    let features = c.require("features")?;
    if features.shape() != [rows, dim] {
        return Err(Error::MetaMismatch(format!(
            "sidecar promises {rows}×{dim} but container holds {:?}",
            features.shape()
        )));
    }
    let label_t = c.require("labels")?;
    if rows > 0 && label_t.shape() != [rows] {
        return Err(Error::MetaMismatch(format!(
            "sidecar promises {rows} labels but container holds {:?}",
            label_t.shape()
        )));
    }
    let mean_parts: Vec<f32> = get("mean")?
        .split(':')
        .map(|p| p.parse().map_err(|_| Error::MetaMismatch("bad mean value".into())))
        .collect::<Result<_>>()?;
    if mean_parts.len() != 3 {
        return Err(Error::MetaMismatch("mean must have 3 components".into()));
    }
    let classes: Vec<String> = get("classes")?.split(',').map(str::to_string).collect();
    let mut labels = Vec::with_capacity(rows);
    for &v in label_t.data().iter().take(rows) {
        if v < 0.0 || v.fract() != 0.0 || (v as usize) >= classes.len() {
            return Err(Error::CorruptFile(format!(
                "label value {v} is not a valid class index"
            )));
        }
        labels.push(v as usize);
    }
    let meta = FeatureMeta {
        variant: get("variant")?.clone(),
        tap: get("tap")?.clone(),
        size: get("size")?.parse().map_err(|_| Error::MetaMismatch("bad size value".into()))?,
        mean: [mean_parts[0], mean_parts[1], mean_parts[2]],
        reduction: get("reduction")?.clone(),
        augment16: get("augment16")?
            .parse()
            .map_err(|_| Error::MetaMismatch("bad augment16 value".into()))?,
        classes,
    };
    FeatureSet::new(features.clone(), labels, meta)
}
