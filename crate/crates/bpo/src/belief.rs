//! Belief distributions over latent parameters: categorical weights on a
//! latent grid, or a diagonal Gaussian.

use serde::{Deserialize, Serialize};

use crate::error::FilterError;

/// Sum tolerance for categorical weight normalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A belief is always representable as a fixed-size numeric vector; see
/// [`Belief::features`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Belief {
    /// Weights over the cells of a latent grid.
    Categorical(Vec<f64>),
    /// Independent Gaussian per dimension.
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

impl Belief {
    /// Uniform categorical over `n` cells.
    pub fn uniform(n: usize) -> Self {
        Belief::Categorical(vec![1.0 / n as f64; n])
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        match self {
            Belief::Categorical(w) => {
                if w.is_empty() {
                    return Err(FilterError::InvalidBelief("empty weight vector".into()));
                }
                let mut sum = 0.0;
                for &x in w {
                    if !x.is_finite() || x < 0.0 {
                        return Err(FilterError::InvalidBelief(format!(
                            "weight {x} is negative or non-finite"
                        )));
                    }
                    sum += x;
                }
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(FilterError::InvalidBelief(format!(
                        "weights sum to {sum}, expected 1"
                    )));
                }
            }
            Belief::Gaussian { mean, var } => {
                if mean.len() != var.len() {
                    return Err(FilterError::InvalidBelief(format!(
                        "mean has {} dims, variance has {}",
                        mean.len(),
                        var.len()
                    )));
                }
                for &m in mean {
                    if !m.is_finite() {
                        return Err(FilterError::InvalidBelief(format!("non-finite mean {m}")));
                    }
                }
                for &v in var {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(FilterError::DegenerateVariance { value: v });
                    }
                }
            }
        }
        Ok(())
    }

    /// Fixed-size numeric encoding: the weight vector, or mean followed by
    /// per-dimension variance.
    pub fn features(&self) -> Vec<f64> {
        match self {
            Belief::Categorical(w) => w.clone(),
            Belief::Gaussian { mean, var } => {
                let mut out = Vec::with_capacity(mean.len() + var.len());
                out.extend_from_slice(mean);
                out.extend_from_slice(var);
                out
            }
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            Belief::Categorical(w) => w.len(),
            Belief::Gaussian { mean, var } => mean.len() + var.len(),
        }
    }
}
