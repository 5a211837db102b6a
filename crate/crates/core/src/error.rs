use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}: only d = 1 and d = 2 are implemented")]
    UnsupportedDimension(usize),

    #[error("grid resolution N = {n} too small for cutoff M = {cutoff}: need N >= {required}")]
    ResolutionTooSmall { n: usize, cutoff: usize, required: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("non-finite density at step {step} (t = {time}): {detail}")]
    NonFinite { step: usize, time: f64, detail: String },

    #[error("negative density {value:e} at step {step} under the reject policy")]
    NegativeDensity { step: usize, value: f64 },

    #[error("scaling regime violated: {0}")]
    RegimeViolation(String),

    #[error("rejected path fraction {fraction:.4} exceeds {limit} at epsilon = {epsilon:e}")]
    TooManyRejections { epsilon: f64, fraction: f64, limit: f64 },

    #[error("report mismatch: {0}")]
    ReportMismatch(String),

    #[error("malformed report: {0}")]
    MalformedReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
