use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = QsnapError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum QsnapError {
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0} in gate operands")]
    DuplicateQubit(usize),

    #[error("{kind} expects {expected} qubit operand(s), got {got}")]
    Arity {
        kind: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{0} is not a unitary gate; use the dedicated measurement/reset operations")]
    NonUnitary(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state has (near-)zero norm {0:e}")]
    ZeroNorm(f64),

    #[error("degenerate candidate: {0}")]
    DegenerateCandidate(String),

    #[error("matrix is singular (smallest singular value {0:e})")]
    Singular(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("measurement branch has vanishing probability {0:e}")]
    ZeroProbabilityBranch(f64),

    #[error("density-matrix simulation of {requested} qubits exceeds the configured cap of {cap}")]
    TooManyQubits { requested: usize, cap: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing forward cache for backward pass")]
    MissingForwardCache,

    #[error("non-finite loss value {0}")]
    NonFinite(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("iteration {index}: {source}")]
    AtIteration {
        index: usize,
        #[source]
        source: Box<QsnapError>,
    },

    #[error("snapshot '{0}' not found")]
    NotFound(String),

    #[error("snapshot '{0}' already exists")]
    Duplicate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl QsnapError {
    pub(crate) fn at_iteration(self, index: usize) -> Self {
        QsnapError::AtIteration {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QsnapError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            QsnapError::Config(_) | QsnapError::Parse { .. } | QsnapError::InvalidParameter(_)
        )
    }
}
