use thiserror::Error;

use crate::sim::SimTime;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
    ScheduleInPast { fire_at: SimTime, now: SimTime },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("probability `{name}` = {value} is outside [0, 1]")]
    Probability { name: &'static str, value: f64 },

    #[error("{0} requires at least one sample")]
    Empty(&'static str),

    #[error("zero-length observation window")]
    ZeroWindow,

    #[error("aggregation over runs with mismatched configurations")]
    MismatchedRuns,

    #[error("target residual rate {target:e} unreachable: solved p_na = {p_na:e}")]
    Unreachable { target: f64, p_na: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the input configuration rather than a
    /// failure during the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Probability { .. } | Error::Unreachable { .. }
        )
    }
}

pub(crate) fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Probability { name, value })
    }
}
