use std::path::PathBuf;

use thiserror::Error;

use crate::qp::ConstraintId;

/// Errors produced by the estimators, the solver and the simulation harness.
#[derive(Debug, Error)]
pub enum MtsError {
    #[error("dataset needs at least {required} observations, got {actual}")]
    InsufficientObservations { required: usize, actual: usize },

    #[error("dataset must have at least one dimension")]
    EmptyDimensions,

    #[error("non-finite entry at dimension {row}, observation {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("eigendecomposition of {0} did not converge")]
    EigenNoConvergence(String),

    #[error(
        "eigenvalue {index} ({value:e}) is below the whitening floor {floor:e}; regularize the covariance first"
    )]
    EigenvalueBelowFloor { index: usize, value: f64, floor: f64 },

    #[error("partial whitening needs 1 <= k < p, got k = {k} with p = {p}")]
    InvalidWhitenRank { k: usize, p: usize },

    #[error("quadratic program is infeasible; conflicting constraints: {0:?}")]
    Infeasible(Vec<ConstraintId>),

    #[error("quadratic program matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("brute-force oracle supports K <= 4, got K = {0}")]
    TooManyTargets(usize),

    #[error("at least one shrinkage target is required")]
    NoTargets,

    #[error("constant-correlation target needs positive variances; dimension {0} has S_ii <= 0")]
    NonPositiveVariance(usize),

    #[error("matrix is singular{0}")]
    Singular(String),

    #[error("filter {0} produces zero variance; log-variance undefined")]
    ZeroVariance(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("failed to read {path}: {message}")]
    Read { path: PathBuf, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MtsError>;
