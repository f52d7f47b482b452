use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{op}: shape mismatch, expected {expected:?}, got {actual:?}")]
    Shape {
        op: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },
    #[error("slice [{start}, {end}) out of range for extent {extent}")]
    SliceRange {
        start: usize,
        end: usize,
        extent: usize,
    },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("merge trace step {step}: index {index} out of range for frontier of {frontier}")]
    TraceStep {
        step: usize,
        index: usize,
        frontier: usize,
    },
    #[error("merge trace has {actual} steps, expected {expected}")]
    TraceLength { expected: usize, actual: usize },
    #[error("bracketed tree, byte {position}: {message}")]
    Bracketed { position: usize, message: String },
    #[error("leaf count mismatch: predicted tree has {pred}, gold tree has {gold}")]
    LeafCount { pred: usize, gold: usize },
    #[error("invalid document {doc}: {message}")]
    Document { doc: String, message: String },
    #[error("non-finite loss on document {doc}")]
    NonFiniteLoss { doc: String },
    #[error("invalid config: {0}")]
    Config(String),
}
