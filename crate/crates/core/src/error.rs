use thiserror::Error;

use crate::evolution::DiagRecord;
use crate::ground_state::ProbeRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid field: {0}")]
    Field(String),

    #[error("argument out of range: {0}")]
    Domain(String),

    #[error(
        "resampling by factor {factor} would alias: {tail:.3e} of the spectral energy lies beyond the target band"
    )]
    Alias { factor: f64, tail: f64 },

    #[error("non-finite value encountered at clock {clock}")]
    NonFinite { clock: f64, last_record: Option<Box<DiagRecord>> },

    #[error("minimization failed: {0}")]
    Minimize(String),

    #[error("threshold bracketing failed: {reason}")]
    Bracket { reason: String, probes: Vec<ProbeRecord> },

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
