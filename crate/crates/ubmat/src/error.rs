//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by coordinate algebra, estimation, inference and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Partition-size vectors must have K >= 1 blocks, each of size >= 2.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// Two operands were built over different partition-size vectors.
    #[error("partition mismatch: left {left:?} vs right {right:?}")]
    PartitionMismatch { left: Vec<usize>, right: Vec<usize> },

    /// A vector or matrix has the wrong dimensions for the operation.
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A linear solve hit a pivot below tolerance. `factor` names the
    /// offending matrix ("A", "Delta", or the dense input).
    #[error("singular factor {factor}: pivot {pivot:.3e} below tolerance {tolerance:.3e}")]
    Singular {
        factor: &'static str,
        pivot: f64,
        tolerance: f64,
    },

    /// A covariance matrix (or its estimate) fails the positive-definiteness
    /// criterion: every a_kk must be positive and Delta = A + B*P must have
    /// positive eigenvalues only.
    #[error(
        "not positive definite: min a_kk = {min_a:.6e}, min Delta eigenvalue = {min_delta_eig:.6e}"
    )]
    NotPositiveDefinite { min_a: f64, min_delta_eig: f64 },

    /// Like [`Error::NotPositiveDefinite`] but raised for plug-in estimates,
    /// where the usual fix is more observations or a different partition.
    #[error(
        "estimated coordinates are not positive definite \
         (min a_kk = {min_a:.6e}, min Delta eigenvalue = {min_delta_eig:.6e}); \
         consider a larger sample or check the block structure"
    )]
    EstimateNotPositiveDefinite { min_a: f64, min_delta_eig: f64 },

    /// A dense matrix claimed to be uniform-block deviates from block
    /// uniformity beyond tolerance.
    #[error(
        "uniform-block structure violation in block ({block_row},{block_col}): \
         deviation {deviation:.3e} exceeds tolerance {tolerance:.3e}"
    )]
    StructureViolation {
        block_row: usize,
        block_col: usize,
        deviation: f64,
        tolerance: f64,
    },

    /// A matrix required to be symmetric is not.
    #[error("matrix not symmetric: max |m_ij - m_ji| = {max_asymmetry:.3e}")]
    NotSymmetric { max_asymmetry: f64 },

    /// The sample is too small for the requested computation.
    #[error("insufficient sample: n = {n}, requires n > {required}")]
    InsufficientSample { n: usize, required: usize },

    /// Grouped data is malformed (missing labels, empty group, ...).
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    /// The Morrison two-moment approximation needs every term to have a
    /// finite variance (df2 > 4).
    #[error("Morrison approximation unavailable: term has df2 = {df2} <= 4")]
    MorrisonUnavailable { df2: f64 },

    /// Catch-all for invalid scalar arguments (alpha, exponents, counts).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Text input failed to parse; positions are 1-based.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
