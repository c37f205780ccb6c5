//! Action distributions emitted by the policy head: a categorical over
//! discrete actions (softmax of logits) or a diagonal Gaussian with a
//! state-independent log-std vector.
//!
//! Gradients here are with respect to the raw parameter vector — the logits,
//! or the concatenation `[mean, log_std]` — which is what the network's
//! reverse pass consumes.

use rand::{Rng, RngCore};

use crate::bamdp::{standard_normal, Action};

const LN_TAU: f64 = 1.837877066409345; // ln(2 pi)

#[derive(Debug, Clone, PartialEq)]
pub enum DistParams {
    Categorical { logits: Vec<f64> },
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
}

impl DistParams {
    /// Length of the raw parameter vector.
    pub fn n_params(&self) -> usize {
        match self {
            DistParams::Categorical { logits } => logits.len(),
            DistParams::Gaussian { mean, log_std } => mean.len() + log_std.len(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            DistParams::Categorical { logits } => logits.iter().all(|x| x.is_finite()),
            DistParams::Gaussian { mean, log_std } => {
                mean.iter().chain(log_std).all(|x| x.is_finite())
            }
        }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .iter()
            .map(|&l| (l - max).exp())
            .sum::<f64>()
            .ln();
    logits.iter().map(|&l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).iter().map(|&lp| lp.exp()).collect()
}

pub fn log_prob(params: &DistParams, action: &Action) -> f64 {
    match params {
        DistParams::Categorical { logits } => log_softmax(logits)[action.index()],
        DistParams::Gaussian { mean, log_std } => {
            let a = action.vector();
            let mut lp = 0.0;
            for d in 0..mean.len() {
                let std = log_std[d].exp();
                let z = (a[d] - mean[d]) / std;
                lp += -0.5 * z * z - log_std[d] - 0.5 * LN_TAU;
            }
            lp
        }
    }
}

pub fn sample(params: &DistParams, rng: &mut dyn RngCore) -> Action {
    match params {
        DistParams::Categorical { logits } => {
            let p = softmax(logits);
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, &pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return Action::Discrete(i);
                }
            }
            Action::Discrete(p.len() - 1)
        }
        DistParams::Gaussian { mean, log_std } => Action::Continuous(
            mean.iter()
                .zip(log_std)
                .map(|(&m, &s)| m + s.exp() * standard_normal(rng))
                .collect(),
        ),
    }
}

/// KL(old || new).
pub fn kl(old: &DistParams, new: &DistParams) -> f64 {
    match (old, new) {
        (DistParams::Categorical { logits: lo }, DistParams::Categorical { logits: ln }) => {
            let lp_o = log_softmax(lo);
            let lp_n = log_softmax(ln);
            lp_o
                .iter()
                .zip(&lp_n)
                .map(|(&o, &n)| {
                    let p = o.exp();
                    if p > 0.0 {
                        p * (o - n)
                    } else {
                        0.0
                    }
                })
                .sum()
        }
        (
            DistParams::Gaussian { mean: mo, log_std: so },
            DistParams::Gaussian { mean: mn, log_std: sn },
        ) => {
            let mut total = 0.0;
            for d in 0..mo.len() {
                let vo = (2.0 * so[d]).exp();
                let vn = (2.0 * sn[d]).exp();
                let dm = mo[d] - mn[d];
                total += sn[d] - so[d] + (vo + dm * dm) / (2.0 * vn) - 0.5;
            }
            total
        }
        _ => panic!("cannot mix distribution families"),
    }
}

pub fn entropy(params: &DistParams) -> f64 {
    match params {
        DistParams::Categorical { logits } => {
            let lp = log_softmax(logits);
            -lp.iter().map(|&l| if l.exp() > 0.0 { l.exp() * l } else { 0.0 }).sum::<f64>()
        }
        DistParams::Gaussian { log_std, .. } => log_std
            .iter()
            .map(|&s| s + 0.5 * (LN_TAU + 1.0))
            .sum(),
    }
}

/// Gradient of `log_prob(params, action)` with respect to the raw params.
pub fn grad_log_prob(params: &DistParams, action: &Action) -> Vec<f64> {
    match params {
        DistParams::Categorical { logits } => {
            let mut g = softmax(logits);
            for gi in &mut g {
                *gi = -*gi;
            }
            g[action.index()] += 1.0;
            g
        }
        DistParams::Gaussian { mean, log_std } => {
            let a = action.vector();
            let dim = mean.len();
            let mut g = vec![0.0; 2 * dim];
            for d in 0..dim {
                let var = (2.0 * log_std[d]).exp();
                let diff = a[d] - mean[d];
                g[d] = diff / var;
                g[dim + d] = diff * diff / var - 1.0;
            }
            g
        }
    }
}

/// Gradient of `kl(old || new)` with respect to the *new* raw params.
pub fn grad_kl_new(old: &DistParams, new: &DistParams) -> Vec<f64> {
    match (old, new) {
        (DistParams::Categorical { logits: lo }, DistParams::Categorical { logits: ln }) => {
            let po = softmax(lo);
            let pn = softmax(ln);
            pn.iter().zip(&po).map(|(&n, &o)| n - o).collect()
        }
        (
            DistParams::Gaussian { mean: mo, log_std: so },
            DistParams::Gaussian { mean: mn, log_std: sn },
        ) => {
            let dim = mo.len();
            let mut g = vec![0.0; 2 * dim];
            for d in 0..dim {
                let vo = (2.0 * so[d]).exp();
                let vn = (2.0 * sn[d]).exp();
                let dm = mn[d] - mo[d];
                g[d] = dm / vn;
                g[dim + d] = 1.0 - (vo + dm * dm) / vn;
            }
            g
        }
        _ => panic!("cannot mix distribution families"),
    }
}

/// Fisher metric of the distribution applied to a raw-parameter tangent `u`,
/// evaluated at `params`. This equals the Hessian of `kl(params || .)` at
/// the same point.
pub fn fisher_product(params: &DistParams, u: &[f64]) -> Vec<f64> {
    match params {
        DistParams::Categorical { logits } => {
            let p = softmax(logits);
            let pu: f64 = p.iter().zip(u).map(|(&pi, &ui)| pi * ui).sum();
            p.iter().zip(u).map(|(&pi, &ui)| pi * (ui - pu)).collect()
        }
        DistParams::Gaussian { mean, log_std } => {
            let dim = mean.len();
            let mut out = vec![0.0; 2 * dim];
            for d in 0..dim {
                let var = (2.0 * log_std[d]).exp();
                out[d] = u[d] / var;
                out[dim + d] = 2.0 * u[dim + d];
            }
            out
        }
    }
}
