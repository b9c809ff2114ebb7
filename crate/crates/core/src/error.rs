use alloc::string::String;

/// Failures while evaluating a model expression.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by an interval containing zero: [{lo}, {hi}]")]
    DivisionByZeroInterval { lo: f64, hi: f64 },
    #[error("non-finite value in component {component}")]
    NonFinite { component: usize },
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("point lies outside the state constraint")]
    OutsideDomain,
}

/// Expression parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("grid with {requested} cells exceeds the addressable limit of {limit}")]
    GridTooLarge { requested: u128, limit: u128 },
    #[error("cell index {index} out of range for grid of {total} cells")]
    CellOutOfRange { index: usize, total: usize },
    #[error("point lies outside the grid domain")]
    PointOutsideDomain,
    #[error("invalid cascade structure: {0}")]
    InvalidCascade(String),
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
