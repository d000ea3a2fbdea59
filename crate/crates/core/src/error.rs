use std::fmt;

use thiserror::Error;

/// Pipeline stage that produced an error inside `run_scenario`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Classical,
    Drive,
    Preparation,
    Quantum,
    Diagnostics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Classical => "classical integration",
            Stage::Drive => "drive construction",
            Stage::Preparation => "state preparation",
            Stage::Quantum => "quantum propagation",
            Stage::Diagnostics => "diagnostics",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside of [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("integration diverged at t = {t}")]
    IntegrationDiverged { t: f64 },

    #[error("integration unstable at t = {t}: defect {defect:e} before projection (step too large)")]
    IntegrationUnstable { t: f64, defect: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("numerical failure in {what}\n{dump}")]
    NumericalFailure { what: String, dump: String },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("{file}: {msg}")]
    Format { file: String, msg: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at(self, stage: Stage) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
