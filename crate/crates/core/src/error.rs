use thiserror::Error;

/// Failure modes of every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {estimate:e}")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("tolerance {requested:e} unreachable (achieved {achieved:e}): {detail}")]
    ToleranceUnreachable { requested: f64, achieved: f64, detail: String },

    #[error("positivity lost at step {step}: {what} = {value:e}")]
    PositivityLoss { step: usize, what: &'static str, value: f64 },

    #[error("precision exhausted at {bits} bits: {detail}")]
    PrecisionExhausted { bits: usize, detail: String },

    #[error("round-trip residual too large: eigenvalue {eigen:e}, weight {weight:e}")]
    Residual { eigen: f64, weight: f64 },

    #[error("suspected missed eigenvalue: {0}")]
    MissedRoot(String),

    #[error("spectral parameter {z} lies within tolerance of an eigenvalue")]
    NearEigenvalue { z: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for rejections of the input itself rather than numerical breakdowns.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Json(_))
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
