use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("Cholesky factorisation failed at pivot {pivot} (value {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("circulant embedding has negative eigenvalue {value:e} at index {index}")]
    NegativeEmbeddingEigenvalue { index: usize, value: f64 },

    #[error("kernel returned a non-finite value at (t={t}, s={s})")]
    NonFiniteKernel { t: f64, s: f64 },

    #[error("closed-form kernel K_H is only available for H >= 1/2 (got H={0})")]
    UnsupportedKernelForm(f64),

    #[error("kernel derivative undefined for s >= t (t={t}, s={s})")]
    DerivativeAcrossDiagonal { t: f64, s: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("empty admissible interval for gamma: need 1-beta < gamma < alpha, got alpha={alpha}, beta={beta}; refine the Hoelder exponent certificates")]
    EmptyGammaInterval { alpha: f64, beta: f64 },

    #[error("ODE solver failed at {location}: {reason}")]
    OdeFailure { location: String, reason: String },

    #[error("solution overflow (|X| > 1e12) at step {step}")]
    Overflow { step: usize },

    #[error("coefficient check failed: {0}")]
    Coefficients(String),

    #[error("bad ensemble file: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
