use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gamma function pole at {0}")]
    GammaPole(f64),

    #[error(
        "Mittag-Leffler series did not converge after {terms} terms (last term {last_term:e})"
    )]
    SeriesNonConvergence { terms: usize, last_term: f64 },

    #[error("contour quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("argument z = {re}{im:+}i lies on the contour image (|s^alpha - z| = {distance:e})")]
    PoleProximity { re: f64, im: f64, distance: f64 },

    #[error("adaptive quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    IntegrationNonConvergence { estimate: f64, error: f64 },

    #[error("Picard iteration did not converge at t = {time} after {iterations} iterations (residual {residual:e})")]
    PicardNonConvergence {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("parameters outside the admissible range: {0}")]
    Inadmissible(String),

    #[error("trajectory is flagged as blown up at t = {0}; it cannot be continued")]
    BlownUp(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    /// Wraps the error with a note on what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error under any context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
