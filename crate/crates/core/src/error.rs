use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigendecomposition did not converge within {sweeps} Jacobi sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("invalid program: {}", .0.join("; "))]
    InvalidProgram(Vec<String>),

    #[error("strategy space too large: {pairs} deterministic strategy pairs (limit {limit})")]
    StrategySpaceTooLarge { pairs: f64, limit: f64 },

    #[error("answer alphabet of size {size} too large for sign-pattern expansion (limit {limit})")]
    AnswerSetTooLarge { size: usize, limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(what: &str, left: (usize, usize), right: (usize, usize)) -> Error {
    Error::DimensionMismatch(format!(
        "{what}: {}x{} vs {}x{}",
        left.0, left.1, right.0, right.1
    ))
}
