use thiserror::Error;

use crate::sim::SimTime;

/// Engine-level failures. Any of these indicates a simulator bug, not bad input.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("event scheduled at {at} but clock is already {now}")]
    ScheduleInPast { at: SimTime, now: SimTime },
    #[error("handler failed on {context}: {message}")]
    Handler { context: String, message: String },
}

/// Rejected configuration. `path` names the offending field, e.g. `links[1].psi_s`.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self { path: path.into(), message: message.into() }
    }
}

/// Out-of-domain argument to an availability formula.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("mean uptime must be > 0, got {0}")]
    NonPositiveUptime(f64),
    #[error("mean downtime must be >= 0, got {0}")]
    NegativeDowntime(f64),
    #[error("availability must lie in [0, 1], got {0}")]
    OutOfRange(f64),
    #[error("at least one path is required")]
    Empty,
}

/// Runtime failure inside a scenario run.
#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("link {link}: {message}")]
    Link { link: String, message: String },
    #[error("trace cross-check failed: {0}")]
    CrossCheck(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("trace error: {0}")]
    Trace(#[from] csv::Error),
}

/// Top-level error for harness entry points. Maps to CLI exit codes.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("runtime abort: {0}")]
    Run(#[from] RunError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Run(_) => 3,
        }
    }
}
