use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not elliptic (sigma_min = {sigma:e} at xi = {xi:?})")]
    NonElliptic { xi: Vec<f64>, sigma: f64 },

    #[error("operator is elliptic; no symbol kernel direction exists")]
    EllipticOperator,

    #[error("right-hand side vanishes: the test field has A u = 0")]
    ZeroField,

    #[error("weight must be strictly positive on the grid (min = {0:e})")]
    NonPositiveWeight(f64),

    #[error("shift parameter must be non-negative, got {0}")]
    NegativeShift(f64),

    #[error("sequence index must be at least 1, got {0}")]
    IndexOutOfRange(usize),

    #[error("grid too small: need at least {needed} points per axis, found {found}")]
    GridTooSmall { needed: usize, found: usize },

    #[error("energy became non-finite during line search")]
    NonFiniteEnergy,

    #[error("unknown builtin operator `{0}`")]
    UnknownBuiltin(String),

    #[error("unknown N-function spec `{0}`")]
    UnknownNFunction(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
