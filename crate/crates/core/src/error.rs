use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("non-finite response at row {row}")]
    NonFinite { row: usize },

    #[error("duplicate observation for subject {subject} in condition {condition}")]
    DuplicateObservation { subject: String, condition: String },

    #[error("unknown factor: {0}")]
    UnknownFactor(String),

    #[error("empty cell: {0}")]
    EmptyCell(String),

    #[error("design is not estimable: {0}")]
    Estimability(String),

    #[error("model did not converge: {0}")]
    NonConvergence(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("p-value outside [0, 1]: {0}")]
    InvalidPValue(f64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("insufficient variance: {0}")]
    InsufficientVariance(String),

    #[error("unknown distribution: {0}")]
    UnknownDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
