use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("lambda {lambda} is not commensurate with the grid: {reason}")]
    Incommensurate { lambda: f64, reason: String },

    #[error("function has zero mass")]
    ZeroMass,

    #[error("masses differ: {left} vs {right}")]
    MassMismatch { left: f64, right: f64 },

    #[error("empty set")]
    EmptySet,

    #[error("fiber oscillation {oscillation} exceeds tolerance {tol}")]
    FiberOscillation { oscillation: f64, tol: f64 },

    #[error("no convergence after {iterations} iterations (best residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
