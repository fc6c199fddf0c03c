//! From-scratch ResNet feature extraction toolkit.
//!
//! Runs ResNet-50/152 (and a small test variant) forward passes with taps
//! on the intermediate stage outputs, reduces the tapped features by PCA
//! or a small trainable convolutional head, and classifies them with a
//! linear SVM. Everything numerical lives here: convolution, batch norm,
//! pooling, the eigen/SVM solvers, image decode and resize, and the
//! binary tensor container used for weights, models, and feature caches.

pub mod container;
pub mod error;
pub mod nn_ops;
pub mod pca;
pub mod pipeline;
pub mod resnet;
pub mod scnn;
pub mod svm;
pub mod tensor;

pub use container::Container;
pub use error::{Error, Result};
pub use tensor::Tensor;
