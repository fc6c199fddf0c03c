//! Subcommand handlers. Every handler prints a short human-readable
//! summary on success; any error propagates to a nonzero exit status.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use resfeats::pca::{load_pca, pca_fit, pca_transform_batch, save_pca};
use resfeats::pipeline::{
    evaluate, extract_features, ingest, load_features, make_toy, save_features, split,
    ExtractOptions, FeatureSet, Part, PreprocessConfig, Reduction,
};
use resfeats::resnet::{tap_shape, ResNetModel, TapName, Variant};
use resfeats::scnn::{
    load_scnn, save_scnn, scnn_build_with, scnn_forward, scnn_train, ScnnConfig, TrainConfig,
};
use resfeats::svm::{
    cross_validate, default_c_grid, load_svm, save_svm, svm_scores, svm_train_detailed, SvmModel,
    SvmParams,
};
use resfeats::nn_ops::softmax;
use resfeats::tensor::{reshape, Tensor};
use resfeats::Container;

use crate::{Cmd, EvalArgs, ExtractArgs, InspectArgs, PcaCmd, ScnnCmd, SvmCmd};

pub fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Extract(a) => extract(a),
        Cmd::Pca(c) => pca(c),
        Cmd::Svm(c) => svm(c),
        Cmd::Scnn(c) => scnn(c),
        Cmd::Eval(a) => eval(a),
        Cmd::MakeToy(a) => {
            make_toy(&a.out, a.seed)?;
            println!(
                "wrote 3 classes x 60 images (32x32 ppm) and random Mini weights to {}",
                a.out.display()
            );
            Ok(())
        }
        Cmd::InspectWeights(a) => inspect(a),
    }
}

fn parse_mean(s: &str) -> Result<[f32; 3]> {
    let parts: Vec<f32> = s
        .split(':')
        .map(|p| p.parse::<f32>().with_context(|| format!("bad mean component {p:?}")))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--mean expects R:G:B, got {s:?}");
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn extract(a: ExtractArgs) -> Result<()> {
    let variant: Variant = a.variant.parse()?;
    let tap: TapName = a.tap.parse()?;
    let weights = Container::read(&a.weights)
        .with_context(|| format!("loading weights {}", a.weights.display()))?;
    let model = ResNetModel::from_container(&variant, &weights)?;
    let mut dataset = ingest(&a.data)?;
    if let Some(tpc) = a.train_per_class {
        dataset = split(&dataset, tpc, a.val_per_class, a.seed)?;
    }
    let part: Part = a.part.parse()?;
    let pca_model = a.pca.as_ref().map(load_pca).transpose()?;
    let reduction = match &pca_model {
        Some(m) => Reduction::Pca(m),
        None => Reduction::None,
    };
    let opts = ExtractOptions {
        preprocess: PreprocessConfig { size: a.size, mean: parse_mean(&a.mean)? },
        augment16: a.augment16,
        workers: a.workers,
    };
    let fs = extract_features(&model, &dataset, part, tap, reduction, &opts)?;
    save_features(&fs, &a.out)?;
    println!(
        "extracted {} rows x {} dims ({} tap of {}) to {}",
        fs.rows(),
        fs.dim(),
        fs.meta.tap,
        fs.meta.variant,
        a.out.display()
    );
    Ok(())
}

fn pca(cmd: PcaCmd) -> Result<()> {
    match cmd {
        PcaCmd::Fit { features, n, out } => {
            let fs = load_features(&features)?;
            let model = pca_fit(&fs.features, n)?;
            save_pca(&model, &out)?;
            let total: f64 =
                model.explained_variance.data().iter().map(|&v| v as f64).sum();
            println!(
                "fitted pca({n}) on {} rows of {} dims, kept variance {total:.4}, wrote {}",
                fs.rows(),
                fs.dim(),
                out.display()
            );
        }
        PcaCmd::Apply { model, features, out } => {
            let m = load_pca(&model)?;
            let fs = load_features(&features)?;
            let reduced = pca_transform_batch(&m, &fs.features)?;
            let mut meta = fs.meta.clone();
            meta.reduction = format!("pca({})", m.n());
            let out_fs = FeatureSet::new(reduced, fs.labels.clone(), meta)?;
            save_features(&out_fs, &out)?;
            println!(
                "projected {} rows from {} to {} dims, wrote {}",
                fs.rows(),
                fs.dim(),
                m.n(),
                out.display()
            );
        }
    }
    Ok(())
}

/// Replaces stringified training-label classes with dataset class names.
fn rename_classes(classes: &mut [String], names: &[String]) -> Result<()> {
    for c in classes.iter_mut() {
        let idx: usize = c
            .parse()
            .with_context(|| format!("model class {c:?} is not a label index"))?;
        let Some(name) = names.get(idx) else {
            bail!("label {idx} out of range for {} class names", names.len());
        };
        *c = name.clone();
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Vote {
    Mean,
    Independent,
}

fn parse_vote(s: &str) -> Result<Vote> {
    match s {
        "mean" => Ok(Vote::Mean),
        "independent" => Ok(Vote::Independent),
        other => bail!("unknown vote mode {other:?}, expected mean|independent"),
    }
}

/// Averages the 16 per-view score vectors of each image when the cache
/// is augmented and mean voting is on; otherwise passes rows through.
fn group_scores(
    scores: Vec<Vec<f32>>,
    labels: &[usize],
    vote: Vote,
    augmented: bool,
) -> Result<(Vec<Vec<f32>>, Vec<usize>)> {
    if !(augmented && vote == Vote::Mean) {
        return Ok((scores, labels.to_vec()));
    }
    if scores.len() % 16 != 0 {
        bail!("augmented cache has {} rows, not a multiple of 16", scores.len());
    }
    let k = scores[0].len();
    let mut out_scores = Vec::with_capacity(scores.len() / 16);
    let mut out_labels = Vec::with_capacity(scores.len() / 16);
    for (chunk, lchunk) in scores.chunks(16).zip(labels.chunks(16)) {
        if lchunk.iter().any(|&l| l != lchunk[0]) {
            bail!("augmented view group spans multiple labels; cache rows are misordered");
        }
        let mut mean = vec![0.0f64; k];
        for row in chunk {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v as f64;
            }
        }
        out_scores.push(mean.iter().map(|&v| (v / 16.0) as f32).collect());
        out_labels.push(lchunk[0]);
    }
    Ok((out_scores, out_labels))
}

/// Strict > scan, so ties resolve to the earliest class.
fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Maps each model class name to its index in the cache's class list.
fn class_mapping(model_classes: &[String], feature_classes: &[String]) -> Result<Vec<usize>> {
    model_classes
        .iter()
        .map(|name| {
            feature_classes.iter().position(|n| n == name).with_context(|| {
                format!("model class {name:?} is not among the cache classes {feature_classes:?}")
            })
        })
        .collect()
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::new();
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading labels {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .with_context(|| format!("bad label line {l:?} in {}", path.display()))
        })
        .collect()
}

fn report_accuracy(
    preds: &[usize],
    truth: &[usize],
    classes: &[String],
    out: Option<&PathBuf>,
    truth_out: Option<&PathBuf>,
) -> Result<()> {
    let r = evaluate(preds, truth, classes.len())?;
    let correct = (r.overall_accuracy * preds.len() as f64).round() as usize;
    println!("accuracy {:.4} ({correct}/{})", r.overall_accuracy, preds.len());
    for (ci, name) in classes.iter().enumerate() {
        println!(
            "  {name}: {:.4} ({} samples)",
            r.per_class_accuracy[ci],
            r.class_total(ci)
        );
    }
    if let Some(p) = out {
        write_labels(p, preds)?;
    }
    if let Some(p) = truth_out {
        write_labels(p, truth)?;
    }
    Ok(())
}

fn feature_rows(fs: &FeatureSet) -> Result<Vec<Tensor>> {
    (0..fs.rows()).map(|i| Ok(fs.row(i)?)).collect()
}

fn svm(cmd: SvmCmd) -> Result<()> {
    match cmd {
        SvmCmd::Train { features, out, c, tol, max_iter, no_normalize, seed } => {
            let fs = load_features(&features)?;
            let params =
                SvmParams { c, tol, max_iter, normalize: !no_normalize, seed };
            let (mut model, report) = svm_train_detailed(&fs.features, &fs.labels, &params)?;
            rename_classes(&mut model.classes, &fs.meta.classes)?;
            save_svm(&model, &out)?;
            for (trace, name) in report.traces.iter().zip(&model.classes) {
                println!(
                    "class {name}: {} epochs, converged={}",
                    trace.dual_objectives.len(),
                    trace.converged
                );
            }
            println!("trained C={c} on {} rows, wrote {}", fs.rows(), out.display());
        }
        SvmCmd::Cv { features, folds, grid, out, tol, max_iter, no_normalize, seed } => {
            let fs = load_features(&features)?;
            let grid = match grid {
                Some(s) => s
                    .split(',')
                    .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad C {p:?}")))
                    .collect::<Result<Vec<f64>>>()?,
                None => default_c_grid(),
            };
            let base = SvmParams { c: 1.0, tol, max_iter, normalize: !no_normalize, seed };
            let report = cross_validate(&fs.features, &fs.labels, &grid, folds, &base)?;
            for (gi, &c) in report.grid.iter().enumerate() {
                let accs = &report.fold_accuracies[gi];
                let mean = accs.iter().sum::<f64>() / accs.len() as f64;
                let folds_str: Vec<String> =
                    accs.iter().map(|a| format!("{a:.4}")).collect();
                println!("C={c:<8} mean={mean:.4}  folds: {}", folds_str.join(" "));
            }
            println!("chosen C = {}", report.chosen_c);
            if let Some(out) = out {
                let params = SvmParams { c: report.chosen_c, ..base };
                let (mut model, _) = svm_train_detailed(&fs.features, &fs.labels, &params)?;
                rename_classes(&mut model.classes, &fs.meta.classes)?;
                save_svm(&model, &out)?;
                println!("trained final model at C={}, wrote {}", report.chosen_c, out.display());
            }
        }
        SvmCmd::Predict { model, features, vote, out, truth_out } => {
            let m: SvmModel = load_svm(&model)?;
            let fs = load_features(&features)?;
            let vote = parse_vote(&vote)?;
            let mapping = class_mapping(&m.classes, &fs.meta.classes)?;
            let scores: Vec<Vec<f32>> = feature_rows(&fs)?
                .iter()
                .map(|row| svm_scores(&m, row))
                .collect::<resfeats::Result<_>>()?;
            let (scores, truth) = group_scores(scores, &fs.labels, vote, fs.meta.augment16)?;
            let preds: Vec<usize> = scores.iter().map(|s| mapping[argmax(s)]).collect();
            report_accuracy(&preds, &truth, &fs.meta.classes, out.as_ref(), truth_out.as_ref())?;
        }
    }
    Ok(())
}

fn parse_shape(s: &str) -> Result<[usize; 3]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("bad extent {p:?}")))
        .collect::<Result<_>>()?;
    if parts.len() != 3 {
        bail!("--shape expects C,H,W, got {s:?}");
    }
    Ok([parts[0], parts[1], parts[2]])
}

/// Feature-map shape for reshaping cache rows: an explicit --shape wins,
/// otherwise it is derived from the cache's variant/tap/size metadata.
fn head_input_shape(fs: &FeatureSet, explicit: Option<&str>) -> Result<[usize; 3]> {
    let shape = match explicit {
        Some(s) => parse_shape(s)?,
        None => {
            let variant: Variant = fs.meta.variant.parse()?;
            let tap: TapName = fs.meta.tap.parse()?;
            let (c, h, w) = tap_shape(&variant, tap, fs.meta.size, fs.meta.size)?;
            [c, h, w]
        }
    };
    if shape[0] * shape[1] * shape[2] != fs.dim() {
        bail!(
            "feature rows have {} values, which is not {}x{}x{} (reduced caches cannot be \
             reshaped; train the head on unreduced features or pass --shape)",
            fs.dim(),
            shape[0],
            shape[1],
            shape[2]
        );
    }
    Ok(shape)
}

fn scnn(cmd: ScnnCmd) -> Result<()> {
    match cmd {
        ScnnCmd::Train {
            features,
            out,
            epochs,
            lr,
            momentum,
            batch,
            weight_decay,
            seed,
            channels,
            conv_layers,
            fc1_width,
            shape,
        } => {
            let fs = load_features(&features)?;
            let input_shape = head_input_shape(&fs, shape.as_deref())?;
            let cfg = ScnnConfig {
                channels,
                conv_layers,
                fc1_width,
                ..Default::default()
            };
            let head = scnn_build_with(&cfg, input_shape, fs.meta.classes.len(), seed)?;
            let tc = TrainConfig {
                learning_rate: lr,
                momentum,
                epochs,
                batch_size: batch,
                seed,
                weight_decay,
            };
            let (mut trained, curve) = scnn_train(&head, &fs.features, &fs.labels, &tc)?;
            trained.classes = fs.meta.classes.clone();
            save_scnn(&trained, &out)?;
            println!(
                "trained {epochs} epochs on {} rows; mean loss {:.4} -> {:.6}; wrote {}",
                fs.rows(),
                curve[0],
                curve[curve.len() - 1],
                out.display()
            );
        }
        ScnnCmd::Eval { model, features, vote, out, truth_out } => {
            let head = load_scnn(&model)?;
            let fs = load_features(&features)?;
            let vote = parse_vote(&vote)?;
            let [c, h, w] = head.input_shape;
            if fs.dim() != c * h * w {
                bail!(
                    "cache rows have {} values but the head expects {c}x{h}x{w}",
                    fs.dim()
                );
            }
            let mapping = class_mapping(&head.classes, &fs.meta.classes)?;
            let probs: Vec<Vec<f32>> = feature_rows(&fs)?
                .iter()
                .map(|row| {
                    let x = reshape(row, vec![c, h, w])?;
                    Ok(softmax(&scnn_forward(&head, &x)?)?.into_data())
                })
                .collect::<resfeats::Result<_>>()?;
            let (probs, truth) = group_scores(probs, &fs.labels, vote, fs.meta.augment16)?;
            let preds: Vec<usize> = probs.iter().map(|p| mapping[argmax(p)]).collect();
            report_accuracy(&preds, &truth, &fs.meta.classes, out.as_ref(), truth_out.as_ref())?;
        }
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let pred = read_labels(&a.pred)?;
    let truth = read_labels(&a.truth)?;
    let k = match a.classes {
        Some(k) => k,
        None => pred.iter().chain(&truth).max().map_or(0, |&m| m + 1),
    };
    let r = evaluate(&pred, &truth, k)?;
    println!("overall accuracy {:.4}", r.overall_accuracy);
    for ci in 0..k {
        println!(
            "  class {ci}: accuracy {:.4} over {} samples",
            r.per_class_accuracy[ci],
            r.class_total(ci)
        );
    }
    println!("confusion (rows = truth, cols = predicted):");
    for t in 0..k {
        let row: Vec<String> =
            (0..k).map(|p| format!("{:>6}", r.confusion_at(t, p))).collect();
        println!("  {}", row.join(" "));
    }
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let c = Container::read(&a.file)?;
    let mut total = 0usize;
    for (name, t) in c.iter() {
        let dims: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        println!("{name}  [{}]  {} values", dims.join("x"), t.len());
        total += t.len();
    }
    println!("{} tensors, {total} values", c.len());
    let sidecar = {
        let mut os = a.file.as_os_str().to_owned();
        os.push(".meta");
        PathBuf::from(os)
    };
    if let Ok(meta) = std::fs::read_to_string(&sidecar) {
        println!("--- {} ---", sidecar.display());
        print!("{meta}");
    }
    Ok(())
}
