use std::path::PathBuf;

use crate::sampler::TraceRow;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: expected {expected} field, got {found}")]
    Domain { expected: &'static str, found: &'static str },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("score singularity: {0}")]
    Singularity(String),

    #[error("degenerate diffusion time t = {0}: perturbation variance is zero")]
    DegenerateTime(f64),

    #[error("initialization error: {0}")]
    Initialization(String),

    /// The sampler produced a non-finite iterate. `trace` holds every row
    /// recorded up to and including the failing sub-step.
    #[error("numerical divergence at step {step}, corrector {corrector}")]
    Divergence { step: usize, corrector: usize, trace: Vec<TraceRow> },

    #[error("training diverged at iteration {iteration}: loss = {loss}")]
    Training { iteration: usize, loss: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format { path: path.into(), message: message.into() }
    }

    /// True for errors caused by malformed inputs or configuration.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::Domain { .. }
                | Error::Validation(_)
                | Error::Range(_)
                | Error::Parameter(_)
                | Error::Initialization(_)
                | Error::Metric(_)
        )
    }

    /// True for numerical blow-ups during sampling or training.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::Training { .. } | Error::Singularity(_) | Error::DegenerateTime(_)
        )
    }

    /// True for file-system and on-disk format failures.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Format { .. } | Error::Json(_) | Error::Csv(_))
    }
}
