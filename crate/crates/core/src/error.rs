use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("under-resolved grid: {0}")]
    Resolution(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("time step {dt:e} exceeds the stability bound {limit:e}")]
    Stability { dt: f64, limit: f64 },

    #[error("infeasible constraints: {0}")]
    Infeasible(String),

    #[error("no admissible mollification radius: {0}")]
    SigmaSearch(String),

    #[error("numerical abort at t = {t}: {reason}")]
    NumericalAbort { t: f64, reason: String },

    #[error("branch tracking failed: {0}")]
    Branch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
