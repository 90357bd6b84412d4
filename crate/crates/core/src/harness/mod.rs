//! Experiment configuration, Monte Carlo pipelines, run records and reports.

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod record;
pub mod report;
pub mod stats;

pub use config::{Experiment, ExperimentConfig, ExperimentKind};
pub use experiments::run;
pub use record::{Check, RunRecord, Table};
pub use report::{report, ReportTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Model(#[from] crate::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("cannot merge records: {0}")]
    Report(String),
}

impl HarnessError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
