//! Black-box Bayes filters.
//!
//! The filters are model-agnostic: environments supply likelihood callables
//! over latent grid centers (categorical case) or dynamics/noise maps
//! (Gaussian case). All functions are pure with respect to their inputs.

use crate::bamdp::LatentGrid;
use crate::belief::Belief;
use crate::error::FilterError;

/// Exact posterior update for a categorical belief over grid centers:
///
/// `out_i = w_i * likelihood(center_i) / sum_j w_j * likelihood(center_j)`
///
/// The input belief is untouched. A zero normalizer means the evidence is
/// impossible under every grid cell and yields [`FilterError::ZeroLikelihood`];
/// the caller decides whether to abort or keep the prior.
pub fn categorical_update(
    weights: &[f64],
    grid: &LatentGrid,
    likelihood: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>, FilterError> {
    assert_eq!(
        weights.len(),
        grid.len(),
        "belief has {} weights for a grid of {} cells",
        weights.len(),
        grid.len()
    );
    let mut out = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let lik = likelihood(grid.center(i));
        assert!(
            lik.is_finite() && lik >= 0.0,
            "likelihood must be finite and nonnegative, got {lik} at cell {i}"
        );
        let mass = w * lik;
        total += mass;
        out.push(mass);
    }
    if total <= 0.0 {
        return Err(FilterError::ZeroLikelihood { bins: weights.len() });
    }
    for w in &mut out {
        *w /= total;
    }
    Ok(out)
}

/// Extended Kalman filter step for a diagonal Gaussian belief with
/// deterministic additive dynamics and no process noise.
///
/// Predict: `mean <- dynamics(mean, action)`, variance unchanged.
/// Correct, per dimension `d` with `v_obs = obs_noise(predicted mean)`:
///
/// `v_post = (1/v_prior + 1/v_obs)^-1`
/// `mean_post = v_post * (mean_prior / v_prior + obs_d / v_obs)`
pub fn ekf_update(
    mean: &[f64],
    var: &[f64],
    action: &[f64],
    obs: &[f64],
    dynamics: impl Fn(&[f64], &[f64]) -> Vec<f64>,
    obs_noise: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Belief, FilterError> {
    for &v in var {
        if !(v.is_finite() && v > 0.0) {
            return Err(FilterError::DegenerateVariance { value: v });
        }
    }
    for &o in obs {
        if !o.is_finite() {
            return Err(FilterError::NonFiniteObservation { value: o });
        }
    }
    let predicted = dynamics(mean, action);
    assert_eq!(predicted.len(), mean.len());
    assert_eq!(obs.len(), mean.len());
    let noise = obs_noise(&predicted);
    assert_eq!(noise.len(), mean.len());

    let mut post_mean = Vec::with_capacity(mean.len());
    let mut post_var = Vec::with_capacity(mean.len());
    for d in 0..mean.len() {
        let v_obs = noise[d];
        if !(v_obs.is_finite() && v_obs > 0.0) {
            return Err(FilterError::DegenerateVariance { value: v_obs });
        }
        let v_post = 1.0 / (1.0 / var[d] + 1.0 / v_obs);
        post_mean.push(v_post * (predicted[d] / var[d] + obs[d] / v_obs));
        post_var.push(v_post);
    }
    Ok(Belief::Gaussian {
        mean: post_mean,
        var: post_var,
    })
}

/// Maximum-likelihood latent estimate: the grid center of the highest-weight
/// cell (ties broken toward the lowest index), or the Gaussian mean.
pub fn mle_estimate(belief: &Belief, grid: Option<&LatentGrid>) -> Vec<f64> {
    match belief {
        Belief::Categorical(w) => {
            let grid = grid.expect("categorical MLE requires the latent grid");
            let mut best = 0;
            for (i, &x) in w.iter().enumerate() {
                if x > w[best] {
                    best = i;
                }
            }
            grid.center(best).to_vec()
        }
        Belief::Gaussian { mean, .. } => mean.clone(),
    }
}

/// Belief entropy in nats: Shannon entropy for categorical weights (with
/// `0 ln 0 = 0`), differential entropy `1/2 sum_d ln(2*pi*e*v_d)` for a
/// diagonal Gaussian.
pub fn belief_entropy(belief: &Belief) -> f64 {
    match belief {
        Belief::Categorical(w) => -w
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln())
            .sum::<f64>(),
        Belief::Gaussian { var, .. } => var
            .iter()
            .map(|&v| 0.5 * (std::f64::consts::TAU * std::f64::consts::E * v).ln())
            .sum(),
    }
}
