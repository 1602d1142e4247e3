use thiserror::Error;

use crate::second_order::CorrespondenceReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("generator set has no points (empty set)")]
    EmptySet,
    #[error("polyhedron is empty")]
    InfeasiblePolyhedron,
    #[error("polyhedral function has an empty domain")]
    EmptyDomain,
    #[error("point is outside dom g (max violation {violation:.3e})")]
    OutOfDomain { violation: f64 },
    #[error("y∘y is outside dom g (max violation {violation:.3e})")]
    OutOfLiftedDomain { violation: f64 },
    #[error("y is not a stationary point of the lifted problem")]
    NotStationary,
    #[error("v_I is not attainable inside the subdifferential")]
    InfeasibleMultiplier,
    #[error("second subderivative depends on the multiplier witness: {first} vs {second}")]
    WitnessDependence { first: f64, second: f64 },
    #[error("stationarity correspondence violated: {0:?}")]
    InconsistencyDetected(Box<CorrespondenceReport>),
    #[error("x is not a stationary point of phi (residual {residual:.3e})")]
    NotAStationaryPoint { residual: f64 },
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("f is not convex (min eigenvalue of Q is {min_eigenvalue:.3e})")]
    NotConvex { min_eigenvalue: f64 },
    #[error("x is not a global minimizer of phi (residual {residual:.3e})")]
    NotAMinimizer { residual: f64 },
    #[error("unsupported problem class: {0}")]
    UnsupportedProblemClass(String),
    #[error("divergence detected at iteration {iteration}: objective rose from {previous} to {current}")]
    DivergenceDetected {
        iteration: usize,
        previous: f64,
        current: f64,
    },
    #[error("insufficient trace: {0}")]
    InsufficientTrace(String),
    #[error("input too large for brute-force oracle: {0}")]
    TooLarge(String),
    #[error("polyhedron is unbounded")]
    UnboundedPolyhedron,
}

impl Error {
    pub(crate) fn dims(what: impl Into<String>) -> Self {
        Error::DimensionMismatch(what.into())
    }
}
