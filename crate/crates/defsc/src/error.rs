use crate::C64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("jacobi exponents must exceed -1 (alpha = {alpha}, beta = {beta})")]
    NonIntegrable { alpha: f64, beta: f64 },
    #[error("polynomial factor d(v) is not positive at v = {at}")]
    NonPositiveDensity { at: f64 },
    #[error("invalid atomic measure: {0}")]
    InvalidAtoms(String),
    #[error("atomic measures have no density")]
    NoDensity,
    #[error("kernel pole on the support (tau = {tau})")]
    PoleOnSupport { tau: C64 },
    #[error("kernel power must be in 1..=4, got {0}")]
    InvalidPower(u32),
    #[error("self-consistent iteration did not converge (residual {residual:e}, last iterate {last})")]
    NoConvergence { last: C64, residual: f64 },
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("spectral parameter needs eta > 0, got {0}")]
    NonPositiveEta(f64),
    #[error("atomic potential with lambda = {lambda} > 1 may split the support into several intervals")]
    MultiIntervalUnsupported { lambda: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("potential entry v[{index}] = {value} lies outside [-1, 1]")]
    SupportViolation { index: usize, value: f64 },
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("matrix is not hermitian (deviation {deviation:e} at ({row}, {col}))")]
    NotHermitian { row: usize, col: usize, deviation: f64 },
    #[error("eigenvectors were not computed")]
    MissingVectors,
    #[error("resolvent is singular (eta = 0)")]
    SingularResolvent,
    #[error("|1 - R2| = {stability:e} is too small; the point is too close to a spectral edge")]
    EdgeDegeneracy { stability: f64 },
    #[error("zeta0 branch is ambiguous and no continuation history is available")]
    BranchAmbiguity,
    #[error("no envelope for experiment kind {0}")]
    UnknownKind(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("need at least 3 distinct abscissae, found {found}")]
    InsufficientPoints { found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
