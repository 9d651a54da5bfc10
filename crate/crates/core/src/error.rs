//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few samples to carry out an estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Sample with singular/zero covariance where a nonsingular one is required.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// Regression fit could not be completed.
    #[error("fit error: {0}")]
    Fit(String),

    /// A model was used in a state it cannot serve predictions from.
    #[error("model state error: {0}")]
    ModelState(String),

    /// No feasible point exists under the active constraint set.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Non-finite value encountered during numerical work.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed row in an input file (1-based data line number).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally valid row that fails a domain invariant.
    #[error("validation error at row {row}: {msg}")]
    Validation { row: usize, msg: String },

    /// Model file written by an incompatible format version.
    #[error("unsupported model file version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
