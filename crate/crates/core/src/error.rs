use thiserror::Error;

/// Errors raised by the numerical routines and pipeline stages.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlsError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rank deficient: singular value {index} is {value:e}, below 1e-12 of the largest ({largest:e})")]
    RankDeficient { index: usize, value: f64, largest: f64 },
    #[error("degree of point {index} is {value:e}, not positive")]
    DegreeNotPositive { index: usize, value: f64 },
    #[error("dense path limited to {limit} points, got {n}")]
    DenseLimitExceeded { n: usize, limit: usize },
    #[error("relative kernel error delta = {0} is not below 1; increase the landmark count")]
    DeltaTooLarge(f64),
    #[error("eigengap {0:e} is below 1e-3; eigenvector comparison is meaningless")]
    EigengapTooSmall(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("ragged rows: row {row} has {got} fields, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("i/o error on {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<FlsError>,
    },
}

impl FlsError {
    pub(crate) fn at(self, stage: &'static str) -> FlsError {
        FlsError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage annotations.
    pub fn root(&self) -> &FlsError {
        match self {
            FlsError::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, FlsError>;
