use thiserror::Error;

/// Errors raised by the library.
///
/// Verification failures (a broken axiom, a rejected section) are not errors:
/// they are carried in the corresponding report types.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("matrix is not unitary (relative residual {residual:.3e})")]
    NotUnitary { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("state is not faithful: smallest density eigenvalue {min_eigenvalue:.3e}")]
    NotFaithful { min_eigenvalue: f64 },

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("invalid representation: {0}")]
    Representation(String),

    #[error("invalid real structure: {0}")]
    RealStructure(String),

    #[error("no chirality-connecting pattern")]
    NoChiralityConnectingPattern,

    #[error("inconsistent pattern and geometry: {0}")]
    InconsistentPattern(String),

    #[error("Jacobian rank unstable across seeds: {ranks:?}")]
    RankInstability { ranks: Vec<usize> },

    #[error("configuration space has no free parameters")]
    EmptyConfigurationSpace,

    #[error("empty state set")]
    EmptyStateSet,

    #[error("{0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
