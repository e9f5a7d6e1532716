use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed policy or scenario document.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("slice `{slice}`: unsupported KPI `{kpi}`")]
    UnsupportedKpi { slice: String, kpi: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("{what} {value} out of range {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("predicate scope {predicate} does not match snapshot scope {snapshot}")]
    ScopeMismatch {
        predicate: &'static str,
        snapshot: &'static str,
    },

    #[error("environment must be reset after a terminal step")]
    ResetRequired,

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::UnsupportedKpi { .. }
                | Error::Validation(_)
                | Error::Dimension { .. }
                | Error::OutOfRange { .. }
                | Error::ScopeMismatch { .. }
        )
    }
}
