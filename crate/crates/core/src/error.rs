//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions are inconsistent (matrix shapes, subsystem lists,
    /// catalogue/protocol mismatches).
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A subsystem index is out of range or repeated.
    #[error("invalid subsystem selection: {0}")]
    InvalidSubsystem(String),

    /// Requested object would exceed the supported total dimension.
    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    /// An input that must be Hermitian is not (deviation given).
    #[error("matrix is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    /// An input that must be a state/POVM/Choi fails its defining invariant.
    #[error("invalid {kind}: {detail}")]
    InvalidObject { kind: &'static str, detail: String },

    /// Feature restricted to specific dimensions (e.g. shipped SIC fiducials).
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    /// Alphabet size incompatible with the requested transformation.
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    /// The SDP constraint set is inconsistent or the cone intersection is
    /// empty.
    #[error("SDP is infeasible: {0}")]
    SdpInfeasible(String),

    /// An iterative routine failed to reach its tolerance.
    #[error("solver failure at step {step}: {detail}")]
    SolverFailure { step: usize, detail: String },

    /// Invalid run configuration (CLI / config file layer).
    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(kind: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidObject { kind, detail: detail.into() }
    }

    pub fn dim(detail: impl Into<String>) -> Self {
        Error::DimMismatch(detail.into())
    }

    pub fn capacity(detail: impl Into<String>) -> Self {
        Error::CapacityExceeded(detail.into())
    }
}
