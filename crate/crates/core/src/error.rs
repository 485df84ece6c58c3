use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstroError {
    #[error("Kepler solver did not converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },
    #[error("invalid orbital elements: {0}")]
    InvalidElements(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttitudeError {
    #[error("non-finite attitude state after integration ({0})")]
    NonFinite(&'static str),
    #[error("invalid attitude step configuration: {0}")]
    InvalidStep(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("assignment for satellite {sat} is {value}, but the scenario has {n_tasks} tasks")]
    AssignmentOutOfRange {
        sat: usize,
        value: usize,
        n_tasks: usize,
    },
    #[error("assignment has length {got}, expected {expected}")]
    AssignmentLength { got: usize, expected: usize },
    #[error("simulation already reached its horizon of {0} steps")]
    HorizonReached(usize),
    #[error("decision interval must be at least 1")]
    ZeroDecisionInterval,
    #[error("scheduler `{name}` failed at step {step}: {reason}")]
    Scheduler {
        name: String,
        step: usize,
        reason: String,
    },
    #[error(transparent)]
    Astro(#[from] AstroError),
    #[error("satellite {sat}: {source}")]
    Attitude { sat: usize, source: AttitudeError },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("asset pool has {available} assets, {requested} requested")]
    PoolTooSmall { available: usize, requested: usize },
    #[error("asset generation exceeded {attempts} attempts with {accepted} accepted")]
    IterationCap { attempts: usize, accepted: usize },
    #[error("inconsistent split specification: {0}")]
    InconsistentSplit(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("malformed trajectory: {0}")]
    Malformed(String),
    #[error("cannot aggregate an empty set of reports")]
    Empty,
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported format version `{found}` (expected `{expected}`)")]
    Version { found: String, expected: String },
    #[error("malformed file: {0}")]
    Malformed(String),
}

impl FormatError {
    pub(crate) fn parse(line: usize, err: serde_json::Error) -> Self {
        FormatError::Parse {
            line: line + err.line().saturating_sub(1),
            message: err.to_string(),
        }
    }
}
