use thiserror::Error;

/// Errors produced by the evaluators, norms, solvers and experiments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("requested point lies outside the sampled window: {0}")]
    Window(String),

    #[error("ratio is undefined: {0}")]
    UndefinedRatio(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("not in the small-data regime: free Y-norm {norm:.3e} >= threshold {threshold:.3e}")]
    NotSmall { norm: f64, threshold: f64 },

    #[error("search range exhausted: {0}")]
    Range(String),

    #[error("insufficient range for a fit: {0}")]
    InsufficientRange(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
