use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance matrix is not positive definite: pivot {pivot} has value {value:e}")]
    Factorization { pivot: usize, value: f64 },

    #[error("solution left the finite range at step {step} (t = {time}): x = {value:e}")]
    Overflow { step: usize, time: f64, value: f64 },

    #[error("{failed} of {total} paths failed, above the 2% tolerance")]
    TooManyFailures { failed: usize, total: usize },

    /// The requested time does not fall on the sampling grid.
    #[error("time {0} is not a grid point")]
    OffGrid(f64),

    /// A computation had no well-defined answer (e.g. a log-log fit through a zero).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed data: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad input rather than by a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::OffGrid(_) | Error::Parse(_) | Error::Io(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
