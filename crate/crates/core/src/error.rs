use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value failed validation. `what` names the offending key.
    #[error("invalid {what}: {reason}")]
    Validation { what: String, reason: String },

    #[error("field table has no value at sensor {sensor}, round {round}")]
    OutOfDomain { sensor: i64, round: usize },

    #[error("round {round} needs {needed} {what} values, only {available} supplied")]
    InsufficientHistory {
        round: usize,
        what: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("window algorithm terminated after round {last}; round {requested} requested")]
    Terminated { last: usize, requested: usize },

    #[error("slot {slot} phase bookkeeping mismatch at round {round}: {reason}")]
    PhaseMismatch {
        slot: usize,
        round: usize,
        reason: String,
    },

    #[error("simulation diverged at sensor {sensor}, round {round} (value {value})")]
    Diverged { sensor: i64, round: usize, value: f64 },

    #[error("spacing draw too short: {required} sensors required, {available} available")]
    NeedMoreSensors { required: usize, available: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            what: what.into(),
            reason: reason.into(),
        }
    }
}

/// Checks that `value` is finite, naming it in the error otherwise.
pub(crate) fn ensure_finite(what: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(what, format!("must be finite, got {value}")))
    }
}
