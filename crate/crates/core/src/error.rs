use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("need n >= p + q for a non-degenerate spectrum (p = {p}, q = {q}, n = {n})")]
    InsufficientSamples { p: usize, q: usize, n: usize },

    #[error("{which} is rank deficient: smallest/largest singular value ratio {ratio:e} < {tol:e}")]
    RankDeficient { which: &'static str, ratio: f64, tol: f64 },

    #[error("singular Gram matrix in {0}")]
    SingularGram(&'static str),

    #[error("{function}: argument {value} outside domain ({domain})")]
    Domain {
        function: &'static str,
        value: f64,
        domain: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64, domain: impl Into<String>) -> Self {
        Error::Domain {
            function,
            value,
            domain: domain.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
