use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input has zero norm (inputs must be preprocessed, e.g. bias-augmented)")]
    ZeroNorm,

    #[error("representation index {index} out of range for width {width}")]
    IndexOutOfRange { index: usize, width: usize },

    #[error("layer {layer} has width {width}, above the exact-mode cap of {cap}")]
    WidthCap { layer: usize, width: usize, cap: usize },

    #[error("exceeds available resources: {needed} stored reals requested, budget is {budget}")]
    ResourceLimit { needed: u128, budget: u128 },

    #[error("degenerate normalizer at layer {layer}: sampled representations carry zero probability")]
    DegenerateNormalizer { layer: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("forward cache does not match the network: {0}")]
    CacheMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("IDX parse error at byte offset {offset}: {message}")]
    Idx { offset: usize, message: String },

    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Diverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
