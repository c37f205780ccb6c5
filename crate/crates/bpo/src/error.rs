//! Error types shared across the crate.

use thiserror::Error;

/// Invalid problem description (bad ranges, degenerate dimensions).
#[derive(Debug, Clone, Error)]
#[error("invalid specification: {msg}")]
pub struct SpecError {
    msg: String,
}

impl SpecError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self { msg: msg.into() }
    }
}

/// Bayes filter failures.
#[derive(Debug, Clone, Error)]
pub enum FilterError {
    /// Every grid cell assigned zero likelihood to the evidence; the
    /// posterior is undefined. Discretized models can hit this on
    /// transitions the grid considers impossible.
    #[error("zero total likelihood across all {bins} grid cells")]
    ZeroLikelihood { bins: usize },
    #[error("non-finite observation component {value}")]
    NonFiniteObservation { value: f64 },
    #[error("degenerate variance {value}; variances must be positive and finite")]
    DegenerateVariance { value: f64 },
    #[error("belief invariant violated: {0}")]
    InvalidBelief(String),
}

/// Simulation failures carry the step index for diagnosis.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("belief update failed at step {step}: {source}")]
    Filter {
        step: usize,
        #[source]
        source: FilterError,
    },
    #[error("non-finite policy output at step {step}")]
    NonFinitePolicy { step: usize },
}

/// Training-loop failures, annotated with the iteration that failed.
#[derive(Debug, Clone, Error)]
pub enum TrainError {
    #[error("iteration {iteration}: {source}")]
    Simulation {
        iteration: usize,
        #[source]
        source: SimError,
    },
    #[error("iteration {iteration}: non-finite {quantity} in optimizer diagnostics")]
    NonFiniteDiagnostic { iteration: usize, quantity: String },
    #[error("{0}")]
    Spec(#[from] SpecError),
}
