//! `resfeats` command-line frontend: dataset extraction, PCA and SVM
//! training, shallow-CNN training, evaluation, and the synthetic toy
//! dataset generator.

mod config;
mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "resfeats", version, about = "ResNet feature extraction toolkit")]
pub struct Cli {
    /// Flat key=value defaults file; command-line flags win. Keys may be
    /// qualified by subcommand ("extract.workers=4"); unqualified keys
    /// apply to any subcommand that accepts the flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Run dataset images through a network and cache tap activations.
    Extract(ExtractArgs),
    /// Fit or apply a PCA reduction over a feature cache.
    #[command(subcommand)]
    Pca(PcaCmd),
    /// Train, cross-validate, or predict with the linear SVM.
    #[command(subcommand)]
    Svm(SvmCmd),
    /// Train or evaluate the shallow CNN head.
    #[command(subcommand)]
    Scnn(ScnnCmd),
    /// Score a predictions file against a truth file.
    Eval(EvalArgs),
    /// Generate the synthetic 3-class dataset plus random Mini weights.
    MakeToy(MakeToyArgs),
    /// List the tensors inside an RFT1 container.
    InspectWeights(InspectArgs),
}

#[derive(clap::Args, Debug)]
pub struct ExtractArgs {
    /// RFT1 weight container.
    #[arg(long)]
    pub weights: PathBuf,
    /// Network variant: resnet50 | resnet152 | mini.
    #[arg(long)]
    pub variant: String,
    /// Tap to read: res3d | res4f | res5c.
    #[arg(long)]
    pub tap: String,
    /// Dataset root: one subdirectory of .ppm images per class.
    #[arg(long)]
    pub data: PathBuf,
    /// Output feature cache (RFT1 + .meta sidecar).
    #[arg(long)]
    pub out: PathBuf,
    /// Emit 16 views per image instead of 1.
    #[arg(long)]
    pub augment16: bool,
    /// Seed for the train/val/test split draw.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 1 is sequential and bit-reproducible, 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Square resize target fed to the network.
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    /// Per-channel means subtracted after scaling to [0,1], R:G:B.
    #[arg(long, default_value = "0.485:0.456:0.406")]
    pub mean: String,
    /// Dataset part to extract: train | val | test | all.
    #[arg(long, default_value = "all")]
    pub part: String,
    /// Assign a split before extraction: training images per class.
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Validation images per class (with --train-per-class).
    #[arg(long, default_value_t = 0)]
    pub val_per_class: usize,
    /// Project rows through a fitted PCA model file.
    #[arg(long)]
    pub pca: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum PcaCmd {
    /// Fit a PCA basis on a feature cache.
    Fit {
        #[arg(long)]
        features: PathBuf,
        /// Number of components to keep.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Project a feature cache through a fitted model.
    Apply {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum SvmCmd {
    /// Train one-vs-rest linear SVMs on a feature cache.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Soft-margin penalty.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Duality-gap stopping tolerance.
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Epoch cap per binary problem.
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        /// Skip per-row L2 normalization.
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Grid-search C by stratified k-fold cross-validation.
    Cv {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 4)]
        folds: usize,
        /// Comma-separated C grid; default 2^-5,2^-3,2^-1,2,8,32.
        #[arg(long)]
        grid: Option<String>,
        /// Train a final model at the chosen C and save it here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_iter: usize,
        #[arg(long)]
        no_normalize: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Classify a feature cache and report accuracy.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// How augmented caches vote: mean | independent.
        #[arg(long, default_value = "mean")]
        vote: String,
        /// Write predicted class indices, one per line.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write matching truth indices, one per line.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
pub enum ScnnCmd {
    /// Train the shallow CNN head on a feature cache.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 0.9)]
        momentum: f64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 5e-4)]
        weight_decay: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Conv output channels.
        #[arg(long, default_value_t = 512)]
        channels: usize,
        /// Stacked 1x1 conv layers.
        #[arg(long, default_value_t = 1)]
        conv_layers: usize,
        /// Hidden FC width.
        #[arg(long, default_value_t = 4096)]
        fc1_width: usize,
        /// Feature map shape C,H,W when the cache meta cannot supply it.
        #[arg(long)]
        shape: Option<String>,
    },
    /// Evaluate a trained head on a feature cache.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// How augmented caches vote: mean | independent.
        #[arg(long, default_value = "mean")]
        vote: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
pub struct EvalArgs {
    /// Predicted class indices, one per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// True class indices, one per line.
    #[arg(long)]
    pub truth: PathBuf,
    /// Class count; defaults to 1 + the largest index seen.
    #[arg(long)]
    pub classes: Option<usize>,
}

#[derive(clap::Args, Debug)]
pub struct MakeToyArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(clap::Args, Debug)]
pub struct InspectArgs {
    /// RFT1 container to list.
    pub file: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let args = config::apply_config_file(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    run::dispatch(cli.cmd)
}
