use thiserror::Error;

/// Errors raised by the numerical kernels, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("zero-magnitude entry at index {0}; phase is undefined")]
    DegenerateEntry(usize),

    #[error("bisection bracket does not enclose a sign change: f(lower)={lower_value}, f(upper)={upper_value}")]
    Bracket { lower_value: f64, upper_value: f64 },

    #[error("conic solver failed: {0}")]
    Solver(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
