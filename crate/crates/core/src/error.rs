use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: achieved error {achieved:e} exceeds tolerance {tolerance:e}")]
    Quadrature { achieved: f64, tolerance: f64 },

    #[error("trajectory is not a liquidation (q(T) = {q_end})")]
    NotLiquidation { q_end: f64 },

    #[error("non-identifiable design: {0}")]
    NotIdentifiable(String),

    #[error("fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("infeasible search bounds: {0}")]
    InfeasibleBounds(String),

    #[error("csv error at line {line}: {message}")]
    Csv { line: u64, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
