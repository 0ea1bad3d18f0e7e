use std::path::PathBuf;

use thiserror::Error;

/// Coarse grouping used by front ends to map failures onto exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Training,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..={max}", max = crate::qsim::MAX_QUBITS)]
    QubitCount(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit state")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("qubit indices must be distinct, got {0:?}")]
    DuplicateQubits(Vec<usize>),
    #[error("non-finite rotation angle {0}")]
    NonFiniteAngle(f64),
    #[error("state size mismatch: {left} vs {right} qubits")]
    SizeMismatch { left: usize, right: usize },
    #[error("amplitude vector length {len} is not 2^{n_qubits}")]
    AmplitudeLength { len: usize, n_qubits: usize },
    #[error("vector has L2 norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("ancilla qubit {0} is not in |0>")]
    AncillaNotReset(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("series too short: need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stale forward cache: network changed since the forward pass")]
    StaleCache,
    #[error("training diverged at epoch {epoch}: {detail}")]
    Diverged { epoch: usize, detail: String },
    #[error("artifact incompatible: {0}")]
    Incompatible(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Diverged { .. } => ErrorClass::Training,
            Error::InvalidArgument(_) | Error::QubitCount(_) => ErrorClass::Config,
            _ => ErrorClass::Data,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
