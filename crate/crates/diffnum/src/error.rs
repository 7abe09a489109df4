use thiserror::Error;

/// Errors surfaced at module boundaries (backward, optimizer steps, I/O).
///
/// Shape mismatches and non-finite values inside tape ops are programmer
/// errors and panic instead; see the crate docs.
#[derive(Debug, Error)]
pub enum Error {
    #[error("loss must be a scalar (rank-0 or single element), got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("loss tensor is not tracked on this tape")]
    UntrackedLoss,
    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("checkpoint format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
