use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("schedule ordering violated: alpha_t = {alpha_t} must be below alpha_prev = {alpha_prev}")]
    Ordering { alpha_t: f64, alpha_prev: f64 },

    #[error("value outside the domain of the formula: {0}")]
    Domain(String),

    #[error("schedule violation: 1 - alpha_prev - sigma^2 = {radicand} is negative")]
    ScheduleViolation { radicand: f64 },

    #[error("all origin weights vanished (normalizer is zero)")]
    DegenerateWeights,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fitness evaluation failed for individual {index}: {reason}")]
    Evaluation { index: usize, reason: String },

    #[error("cart-pole episode has already terminated")]
    Terminated,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable name used in manifests.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Ordering { .. } => "ordering",
            Error::Domain(_) => "domain",
            Error::ScheduleViolation { .. } => "schedule_violation",
            Error::DegenerateWeights => "degenerate_weights",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Evaluation { .. } => "evaluation",
            Error::Terminated => "terminated",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
