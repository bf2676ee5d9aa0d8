use thiserror::Error;

/// Errors produced by the solver and its file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("line {line}: unknown identifier `{name}`")]
    UnknownIdentifier { line: usize, name: String },

    #[error("line {line}: duplicate declaration of {what}")]
    Duplicate { line: usize, what: String },

    #[error("missing declaration: {0}")]
    Missing(&'static str),

    #[error("transition row ({state}, {action}) sums to {sum}, expected 1")]
    RowSum {
        state: String,
        action: String,
        sum: f64,
    },

    #[error("initial distribution sums to {0}, expected 1")]
    InitialSum(f64),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("history lattice cap exceeded at t = {t}: at least {count} histories in total (cap {cap})")]
    HistoryCap { t: usize, count: u128, cap: u64 },

    #[error("{what} enumeration cap exceeded: {count} > {cap}")]
    EnumerationCap {
        what: &'static str,
        count: f64,
        cap: u64,
    },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a metric: {0}")]
    NotAMetric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
