use thiserror::Error;

use crate::model::Leg;

/// Every recoverable failure the estimator, simulator and evaluator report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("leg {0:?} is at a kinematic singularity (sigma_min < 1e-8)")]
    SingularJacobian(Leg),
    #[error("no stance legs: leg odometry unavailable this tick")]
    NoStanceLegs,
    #[error("no desired-foot reference within {tolerance} s of t = {t}")]
    MissingReference { t: f64, tolerance: f64 },
    #[error("exteroceptive sample is {age} s old (horizon {horizon} s)")]
    StaleExtero { age: f64, horizon: f64 },
    #[error("covariance lost positive semidefiniteness (min eigenvalue {min_eigenvalue})")]
    NonPsdCovariance { min_eigenvalue: f64 },
    #[error("innovation covariance is ill-conditioned (condition number {condition})")]
    SingularInnovation { condition: f64 },
    #[error("no measurement available for the fusion update")]
    NoMeasurement,
    #[error("out-of-order {channel} event: t = {t} after {last}")]
    OutOfOrderEvent {
        channel: &'static str,
        t: f64,
        last: f64,
    },
    #[error("infeasible gait: {0}")]
    InfeasibleGait(String),
    #[error("insufficient overlap between trajectories: {0}")]
    InsufficientOverlap(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed log at line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Malformed configuration, logs or unreadable files, as opposed to
    /// failures while running.
    pub fn is_bad_input(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Log { .. } | Error::Io(_) | Error::OutOfOrderEvent { .. })
    }
}
