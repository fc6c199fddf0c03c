//! Dataset ingestion, image preprocessing and augmentation, feature
//! extraction, caching, and evaluation metrics.

pub mod augment;
pub mod dataset;
pub mod eval;
pub mod extract;
pub mod features;
pub mod image;
pub mod ppm;
pub mod toy;

pub use augment::augment16;
pub use dataset::{ingest, split, Dataset, Part, Split};
pub use eval::{evaluate, EvalResult};
pub use extract::{extract_features, ExtractOptions, Reduction};
pub use features::{load_features, save_features, FeatureMeta, FeatureSet};
pub use image::{preprocess, PreprocessConfig, RgbImage};
pub use ppm::{read_ppm, write_ppm};
pub use toy::make_toy;
