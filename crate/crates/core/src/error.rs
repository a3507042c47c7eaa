use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported instance: {0}")]
    Unsupported(String),

    /// A precondition of an instance generator or an algorithm was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("dimension {got} too small, at least {required} is required")]
    DimensionTooSmall { required: usize, got: usize },

    #[error("weight scheme invalid at (x={x}, y={y}, q={q:?}): {reason}")]
    SchemeViolation {
        x: usize,
        y: usize,
        q: Option<usize>,
        reason: String,
    },

    #[error("weight scheme has no admissible (x, y, q) triple")]
    NoAdmissiblePair,

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invariant failure: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
