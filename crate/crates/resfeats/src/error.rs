//! Error types shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the toolkit.
///
/// Variants map one-to-one onto the documented error classes of the
/// public operations; the payload is a human-readable description that
/// names the offending entry, shape, or path.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or matrix shapes do not agree.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Window/stride/padding combination yields no valid output.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// The operation exists only for a restricted geometry (e.g. 1x1 kernels).
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// A class or element index is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A configuration value violates its documented constraints.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Input data carries no usable signal (e.g. zero variance).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Classifier training needs at least two distinct classes.
    #[error("single-class data: {0}")]
    SingleClassData(String),

    /// A class has too few samples for the requested fold count.
    #[error("insufficient class samples: {0}")]
    InsufficientClassSamples(String),

    /// A class has too few samples for the requested split sizes.
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    /// A required tensor entry is absent from a container.
    #[error("missing tensor: {0}")]
    MissingTensor(String),

    /// A container holds an entry the consumer does not recognize.
    #[error("unexpected tensor: {0}")]
    UnexpectedTensor(String),

    /// A container file is truncated or malformed.
    #[error("corrupt file: {0}")]
    CorruptFile(String),

    /// A sidecar and its tensor container disagree.
    #[error("meta mismatch: {0}")]
    MetaMismatch(String),

    /// A dataset class directory holds no images.
    #[error("empty class: {0}")]
    EmptyClass(String),

    /// An image file could not be decoded.
    #[error("unreadable image: {0}")]
    UnreadableImage(String),

    /// A dataset root holds no class directories.
    #[error("no classes: {0}")]
    NoClasses(String),

    /// Underlying I/O failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
