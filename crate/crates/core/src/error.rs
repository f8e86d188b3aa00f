use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid coefficient {name} = {value} at quadrature point ({x}, {y})")]
    InvalidCoefficient {
        name: &'static str,
        value: f64,
        x: f64,
        y: f64,
    },

    #[error(
        "solver failure after {iterations} iterations: relative residual {relative_residual:e}"
    )]
    SolverFailure {
        iterations: usize,
        relative_residual: f64,
    },

    #[error("degenerate operator: {0}")]
    DegenerateOperator(String),

    #[error("iteration is not contractive (rate {rate})")]
    NonContractive { rate: f64 },
}

impl Error {
    pub(crate) fn dims(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
