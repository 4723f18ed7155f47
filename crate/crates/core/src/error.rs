use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("frequency quadrature did not converge (last estimate {last:e}, previous {previous:e})")]
    QuadratureNotConverged { last: f64, previous: f64 },

    #[error("divergent integral: {0}")]
    DivergentIntegral(String),

    #[error("covariance is not positive semidefinite: eigenvalue {min_eigenvalue:e} below -eps * {max_eigenvalue:e}")]
    KernelNotPsd { min_eigenvalue: f64, max_eigenvalue: f64 },

    #[error("singular normalization q'(t)^2 - q(t) q''(t) = {value:e} at t = {t}")]
    SingularNormalization { t: f64, value: f64 },

    #[error("coefficient undefined (flagged) at t = {t}")]
    FlaggedCoefficient { t: f64 },

    #[error("unstable integration at t = {t}: magnitude {magnitude:e}")]
    Instability { t: f64, magnitude: f64 },

    #[error("total Hilbert space dimension {requested} exceeds cap {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::QuadratureNotConverged { .. }
                | Error::KernelNotPsd { .. }
                | Error::SingularNormalization { .. }
                | Error::FlaggedCoefficient { .. }
                | Error::Instability { .. }
        )
    }
}

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

pub type Result<T> = std::result::Result<T, Error>;
