//! Multi-class linear SVM: one-vs-rest binary problems solved by dual
//! coordinate descent, plus stratified k-fold cross-validation over C.
//!
//! Each binary problem minimizes 0.5·wᵀw + C·Σ max(0, 1 − t·wᵀx̃) with
//! the bias folded in as a constant-1 feature. The solver sweeps dual
//! coordinates in a seeded random permutation per epoch and stops on a
//! relative duality gap below `tol`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use std::path::Path;

use crate::container::{write_atomic, Container};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct SvmParams {
    /// Hinge-loss weight; larger C fits harder.
    pub c: f64,
    /// Relative duality-gap stopping tolerance.
    pub tol: f64,
    /// Maximum training epochs per binary problem.
    pub max_iter: usize,
    /// L2-normalize each feature row to unit length before training and
    /// prediction.
    pub normalize: bool,
    /// Seed for the per-epoch coordinate permutations.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-3, max_iter: 1000, normalize: true, seed: 0 }
    }
}

/// Default cross-validation grid: odd powers of two from 2⁻⁵ to 2⁵.
pub fn default_c_grid() -> Vec<f64> {
    vec![0.03125, 0.125, 0.5, 2.0, 8.0, 32.0]
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    /// Class names in prediction order (ascending original label).
    pub classes: Vec<String>,
    /// One weight row per class, shape [K, n].
    pub weights: Tensor,
    /// Per-class bias, shape [K].
    pub biases: Tensor,
    pub c: f64,
    pub normalize: bool,
}

/// Convergence trace of one one-vs-rest binary problem.
#[derive(Debug, Clone)]
pub struct ClassTrace {
    pub class: String,
    /// Dual objective D(α) = Σα − 0.5‖w‖² after each epoch.
    pub dual_objectives: Vec<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub traces: Vec<ClassTrace>,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub grid: Vec<f64>,
    /// Accuracy per grid value per fold, shape grid × k.
    pub fold_accuracies: Vec<Vec<f64>>,
    pub chosen_c: f64,
}

fn validate_inputs(x: &Tensor, y: &[usize]) -> Result<(usize, usize)> {
    let (s, n) = x.dims2()?;
    if s != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "{s} feature rows but {} labels",
            y.len()
        )));
    }
    if x.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("feature matrix has a non-finite entry".into()));
    }
    Ok((s, n))
}

/// Distinct labels in ascending order.
fn distinct_labels(y: &[usize]) -> Vec<usize> {
    let mut labels: Vec<usize> = y.to_vec();
    labels.sort_unstable();
    labels.dedup();
    labels
}

fn l2_normalize_rows(x: &Tensor) -> Tensor {
    let (s, n) = x.dims2().expect("matrix");
    let mut out = x.data().to_vec();
    for i in 0..s {
        let row = &mut out[i * n..(i + 1) * n];
        let norm = row.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v = (*v as f64 / norm) as f32;
            }
        }
    }
    Tensor::new(vec![s, n], out).expect("same shape")
}

/// Solves one binary problem; `targets` are ±1. Returns the augmented
/// weight vector [w, b] and the per-epoch trace.
fn solve_binary(
    x: &Tensor,
    targets: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    mut rng: ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>, f64, f64, bool) {
    let (s, n) = x.dims2().expect("matrix");
    let xd = x.data();
    // Augmented feature dot products; the constant-1 feature adds 1.
    let q_diag: Vec<f64> = (0..s)
        .map(|i| {
            xd[i * n..(i + 1) * n]
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                + 1.0
        })
        .collect();

    let mut alpha = vec![0.0f64; s];
    let mut w = vec![0.0f64; n + 1];
    let mut order: Vec<usize> = (0..s).collect();
    let mut objectives = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        order.shuffle(&mut rng);
        for &i in &order {
            let t = targets[i];
            let row = &xd[i * n..(i + 1) * n];
            let mut dot = w[n];
            for (j, &v) in row.iter().enumerate() {
                dot += w[j] * v as f64;
            }
            let g = t * dot - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg != 0.0 {
                let new = (alpha[i] - g / q_diag[i]).clamp(0.0, c);
                let delta = new - alpha[i];
                if delta != 0.0 {
                    for (j, &v) in row.iter().enumerate() {
                        w[j] += delta * t * v as f64;
                    }
                    w[n] += delta * t;
                    alpha[i] = new;
                }
            }
        }

        let wnorm2: f64 = w.iter().map(|&v| v * v).sum();
        let dual: f64 = alpha.iter().sum::<f64>() - 0.5 * wnorm2;
        objectives.push(dual);

        let mut hinge = 0.0f64;
        for i in 0..s {
            let row = &xd[i * n..(i + 1) * n];
            let mut dot = w[n];
            for (j, &v) in row.iter().enumerate() {
                dot += w[j] * v as f64;
            }
            hinge += (1.0 - targets[i] * dot).max(0.0);
        }
        let primal = 0.5 * wnorm2 + c * hinge;
        if primal - dual <= tol * primal.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    let amin = alpha.iter().cloned().fold(f64::INFINITY, f64::min);
    let amax = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (w, objectives, amin, amax, converged)
}

/// Trains a one-vs-rest model and returns the per-class convergence
/// traces alongside it.
pub fn svm_train_detailed(
    x: &Tensor,
    y: &[usize],
    p: &SvmParams,
) -> Result<(SvmModel, TrainReport)> {
    let (s, n) = validate_inputs(x, y)?;
    if s == 0 {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    if !(p.c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {}", p.c)));
    }
    if !(p.tol > 0.0) || p.max_iter == 0 {
        return Err(Error::InvalidConfig(
            "tol must be positive and max_iter at least 1".into(),
        ));
    }
    let labels = distinct_labels(y);
    if labels.len() < 2 {
        return Err(Error::SingleClassData(format!(
            "training data holds {} distinct class(es); need at least 2",
            labels.len()
        )));
    }

    let xn = if p.normalize { l2_normalize_rows(x) } else { x.clone() };

    // Each class's problem gets its own RNG stream, so the parallel
    // schedule cannot affect results.
    let solved: Vec<(Vec<f64>, ClassTrace)> = labels
        .par_iter()
        .enumerate()
        .map(|(k, &label)| {
            let targets: Vec<f64> =
                y.iter().map(|&yi| if yi == label { 1.0 } else { -1.0 }).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(1 + k as u64);
            let (w, objectives, amin, amax, converged) =
                solve_binary(&xn, &targets, p.c, p.tol, p.max_iter, rng);
            let trace = ClassTrace {
                class: label.to_string(),
                dual_objectives: objectives,
                alpha_min: amin,
                alpha_max: amax,
                converged,
            };
            (w, trace)
        })
        .collect();

    let mut weights = Vec::with_capacity(labels.len() * n);
    let mut biases = Vec::with_capacity(labels.len());
    let mut traces = Vec::with_capacity(labels.len());
    for (w, trace) in solved {
        weights.extend(w[..n].iter().map(|&v| v as f32));
        biases.push(w[n] as f32);
        traces.push(trace);
    }
    let model = SvmModel {
        classes: labels.iter().map(|l| l.to_string()).collect(),
        weights: Tensor::new(vec![labels.len(), n], weights)?,
        biases: Tensor::new(vec![labels.len()], biases)?,
        c: p.c,
        normalize: p.normalize,
    };
    Ok((model, TrainReport { traces }))
}

pub fn svm_train(x: &Tensor, y: &[usize], p: &SvmParams) -> Result<SvmModel> {
    svm_train_detailed(x, y, p).map(|(m, _)| m)
}

/// Scores every class for one feature vector: w_k·x + b_k. Applies the
/// model's stored normalization first.
pub fn svm_scores(m: &SvmModel, x: &Tensor) -> Result<Vec<f32>> {
    let (k, n) = m.weights.dims2()?;
    if x.shape() != [n] {
        return Err(Error::ShapeMismatch(format!(
            "feature vector shape {:?} does not match model dimension {n}",
            x.shape()
        )));
    }
    let mut xv: Vec<f64> = x.data().iter().map(|&v| v as f64).collect();
    if m.normalize {
        let norm = xv.iter().map(|&v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut xv {
                *v /= norm;
            }
        }
    }
    let mut scores = Vec::with_capacity(k);
    for ki in 0..k {
        let row = &m.weights.data()[ki * n..(ki + 1) * n];
        let mut acc = m.biases.data()[ki] as f64;
        for (j, &wv) in row.iter().enumerate() {
            acc += wv as f64 * xv[j];
        }
        scores.push(acc as f32);
    }
    Ok(scores)
}

/// Predicted class index (into `m.classes`) and all class scores.
/// Score ties break to the earlier class.
pub fn svm_predict(m: &SvmModel, x: &Tensor) -> Result<(usize, Vec<f32>)> {
    let scores = svm_scores(m, x)?;
    let mut best = 0;
    for (i, &sc) in scores.iter().enumerate().skip(1) {
        if sc > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}

/// Stratified fold assignment: per class, shuffle then deal round-robin.
/// Fold sizes per class differ by at most one.
pub fn stratified_folds(y: &[usize], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("fold count must be at least 2, got {k}")));
    }
    let labels = distinct_labels(y);
    let mut fold = vec![0usize; y.len()];
    for (ci, &label) in labels.iter().enumerate() {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == label).collect();
        if idx.len() < k {
            return Err(Error::InsufficientClassSamples(format!(
                "class {label} has {} samples, fewer than {k} folds",
                idx.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(101 + ci as u64);
        idx.shuffle(&mut rng);
        for (j, &i) in idx.iter().enumerate() {
            fold[i] = j % k;
        }
    }
    Ok(fold)
}

/// Grid search over C by stratified k-fold cross-validation. The chosen
/// C attains the highest mean accuracy; ties break to the smaller C.
pub fn cross_validate(
    x: &Tensor,
    y: &[usize],
    grid: &[f64],
    k: usize,
    base: &SvmParams,
) -> Result<CvReport> {
    let (s, n) = validate_inputs(x, y)?;
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty C grid".into()));
    }
    if grid.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::InvalidConfig("C grid values must be positive".into()));
    }
    let fold = stratified_folds(y, k, base.seed)?;

    // Pre-split once; folds are shared across the whole grid.
    let splits: Vec<(Tensor, Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let train_idx: Vec<usize> = (0..s).filter(|&i| fold[i] != f).collect();
            let mut data = Vec::with_capacity(train_idx.len() * n);
            let mut labels = Vec::with_capacity(train_idx.len());
            for &i in &train_idx {
                data.extend_from_slice(&x.data()[i * n..(i + 1) * n]);
                labels.push(y[i]);
            }
            let test_idx: Vec<usize> = (0..s).filter(|&i| fold[i] == f).collect();
            (
                Tensor::new(vec![labels.len(), n], data).expect("split shape"),
                labels,
                test_idx,
            )
        })
        .collect();

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|ci| (0..k).map(move |f| (ci, f)))
        .collect();
    let accs: Vec<f64> = jobs
        .par_iter()
        .map(|&(ci, f)| {
            let (train_x, train_y, test_idx) = &splits[f];
            let mut p = base.clone();
            p.c = grid[ci];
            p.seed = base.seed.wrapping_add(1 + f as u64);
            let model = svm_train(train_x, train_y, &p)?;
            let mut correct = 0usize;
            for &i in test_idx {
                let xi = Tensor::new(vec![n], x.data()[i * n..(i + 1) * n].to_vec())?;
                let (pred, _) = svm_predict(&model, &xi)?;
                if model.classes[pred] == y[i].to_string() {
                    correct += 1;
                }
            }
            Ok(correct as f64 / test_idx.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;

    let fold_accuracies: Vec<Vec<f64>> =
        (0..grid.len()).map(|ci| accs[ci * k..(ci + 1) * k].to_vec()).collect();

    let mut chosen = 0usize;
    let mut best_mean = f64::NEG_INFINITY;
    for (ci, row) in fold_accuracies.iter().enumerate() {
        let mean = row.iter().sum::<f64>() / k as f64;
        if mean > best_mean || (mean == best_mean && grid[ci] < grid[chosen]) {
            best_mean = mean;
            chosen = ci;
        }
    }
    Ok(CvReport { grid: grid.to_vec(), fold_accuracies, chosen_c: grid[chosen] })
}

/// Writes the model: RFT1 container at `path` plus a text sidecar at
/// `<path>.meta` listing the classes, C, and the normalization flag.
pub fn save_svm(m: &SvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for class in &m.classes {
        if class.contains(',') || class.contains('\n') {
            return Err(Error::InvalidConfig(format!(
                "class name {class:?} may not contain commas or newlines"
            )));
        }
    }
    let mut c = Container::new();
    c.insert("svm.weights", m.weights.clone());
    c.insert("svm.biases", m.biases.clone());
    c.write(path)?;
    let meta = format!(
        "kind=svm\nclasses={}\nc={}\nnormalize={}\n",
        m.classes.join(","),
        m.c,
        m.normalize
    );
    write_atomic(&sidecar_path(path), meta.as_bytes())
}

pub fn load_svm(path: impl AsRef<Path>) -> Result<SvmModel> {
    let path = path.as_ref();
    let c = Container::read(path)?;
    let weights = c.require("svm.weights")?.clone();
    let biases = c.require("svm.biases")?.clone();
    let meta = std::fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::MetaMismatch(format!(
            "missing sidecar {}: {e}",
            sidecar_path(path).display()
        ))
    })?;
    let mut classes: Option<Vec<String>> = None;
    let mut cval: Option<f64> = None;
    let mut normalize: Option<bool> = None;
    let mut kind_ok = false;
    for line in meta.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::MetaMismatch(format!("sidecar line without '=': {line:?}"))
        })?;
        match key {
            "kind" => kind_ok = value == "svm",
            "classes" => classes = Some(value.split(',').map(str::to_string).collect()),
            "c" => {
                cval = Some(value.parse().map_err(|_| {
                    Error::MetaMismatch(format!("bad c value {value:?}"))
                })?)
            }
            "normalize" => {
                normalize = Some(value.parse().map_err(|_| {
                    Error::MetaMismatch(format!("bad normalize value {value:?}"))
                })?)
            }
            _ => {}
        }
    }
    if !kind_ok {
        return Err(Error::MetaMismatch("sidecar kind is not \"svm\"".into()));
    }
    let classes = classes.ok_or_else(|| Error::MetaMismatch("sidecar lacks classes".into()))?;
    let (k, _) = weights.dims2()?;
    if classes.len() != k || biases.shape() != [k] {
        return Err(Error::MetaMismatch(format!(
            "{} classes in sidecar but {k} weight rows and {:?} biases",
            classes.len(),
            biases.shape()
        )));
    }
    Ok(SvmModel {
        classes,
        weights,
        biases,
        c: cval.ok_or_else(|| Error::MetaMismatch("sidecar lacks c".into()))?,
        normalize: normalize.ok_or_else(|| Error::MetaMismatch("sidecar lacks normalize".into()))?,
    })
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    std::path::PathBuf::from(s)
}
