use thiserror::Error;

fn dims(shape: &[usize]) -> String {
    format!("{shape:?}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("invalid shape {}: dimensions must be positive", dims(.shape))]
    BadShape { shape: Vec<usize> },
    #[error("shape {} needs {} values, got {len}", dims(.shape), .shape.iter().product::<usize>())]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("shape mismatch in {op}: {} vs {}", dims(.left), dims(.right))]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op} requires a rank-2 tensor, got {}", dims(.shape))]
    Rank { op: &'static str, shape: Vec<usize> },
    #[error("{op} on an empty input")]
    Empty { op: &'static str },
    #[error("{op}: index {index} out of bounds for {bound}")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("backward requires a scalar loss, got shape {}", dims(.shape))]
    NonScalarLoss { shape: Vec<usize> },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("token id {id} outside vocabulary of size {size}")]
    OutOfVocab { id: usize, size: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("vocabulary: {0}")]
    Vocab(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("parameter `{0}` not found")]
    MissingParam(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
