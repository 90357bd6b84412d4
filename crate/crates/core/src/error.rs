use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {what} = {value} ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid candidate family: {0}")]
    InvalidFamily(String),

    #[error("range constraint violated on sample {sample}: |f_{first} - f_{second}| = {gap} > 1")]
    RangeViolation {
        first: usize,
        second: usize,
        sample: usize,
        gap: f64,
    },

    #[error("loss of model {model} on validation sample {sample} is {value}, outside [0, 1]")]
    LossRange {
        model: String,
        sample: usize,
        value: f64,
    },

    #[error("sampler does not expose true means; cannot verify the bound")]
    Unverifiable,

    #[error("split error: {0}")]
    Split(String),

    #[error("fit of model {model} failed: {reason}")]
    Fit { model: String, reason: String },

    #[error("no model could be fitted")]
    NoFittedModel,

    #[error("invalid penalised criterion: {0}")]
    InvalidCriterion(String),

    #[error("invalid alpha grid: {0}")]
    InvalidGrid(String),

    #[error("large-dimension threshold {threshold} exceeds the largest dimension {max_dim}")]
    DegenerateThreshold { threshold: usize, max_dim: usize },

    #[error("diagnostic unavailable for model {0}: within-model minimiser unknown")]
    DiagnosticUnavailable(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            reason,
        }
    }
}
