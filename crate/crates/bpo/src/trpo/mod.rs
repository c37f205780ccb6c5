//! KL-constrained batch policy optimization: generalized advantage
//! estimation, a conjugate-gradient natural-gradient step with backtracking
//! line search, and value-baseline regression.

pub mod baseline;
pub mod cg;
pub mod fvp;
pub mod gae;

pub use baseline::{fit_baseline, AdamState, FitConfig, FitReport};
pub use cg::conjugate_gradient;
pub use fvp::{
    backtracking_line_search, build_cache, evaluate_policy, fisher_vector_product,
    surrogate_gradient, BatchCache,
};
pub use gae::{compute_gae, normalize_advantages};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bamdp::Action;
use crate::envs::BeliefEnv;
use crate::net::{PolicyNet, ValueNet};
use crate::sim::{policy_inputs, InputMode, Trajectory};

/// One policy-optimization sample: the policy inputs it was generated with,
/// the sampled action, its sampling-time log-probability, and the reward.
#[derive(Debug, Clone)]
pub struct Sample {
    pub state_in: Vec<f64>,
    pub belief_in: Vec<f64>,
    pub action: Action,
    pub log_prob_old: f64,
    pub reward: f64,
}

/// Flattened batch with per-episode boundaries `[start, end)`.
#[derive(Debug, Clone)]
pub struct Batch {
    pub samples: Vec<Sample>,
    pub bounds: Vec<(usize, usize)>,
}

impl Batch {
    pub fn from_trajectories(
        trajs: &[Trajectory],
        mode: InputMode,
        env: &dyn BeliefEnv,
    ) -> Self {
        let mut samples = Vec::with_capacity(trajs.iter().map(Trajectory::len).sum());
        let mut bounds = Vec::with_capacity(trajs.len());
        for traj in trajs {
            let start = samples.len();
            for t in 0..traj.len() {
                let (state_in, belief_in) =
                    policy_inputs(mode, &traj.states[t], &traj.momentary[t], &traj.beliefs[t], env);
                samples.push(Sample {
                    state_in,
                    belief_in,
                    action: traj.actions[t].clone(),
                    log_prob_old: traj.log_probs[t],
                    reward: traj.rewards[t],
                });
            }
            bounds.push((start, samples.len()));
        }
        Self { samples, bounds }
    }

    pub fn n_steps(&self) -> usize {
        self.samples.len()
    }

    pub fn mean_return(&self, gamma: f64) -> f64 {
        let total: f64 = self
            .bounds
            .iter()
            .map(|&(s, e)| {
                let mut acc = 0.0;
                let mut scale = 1.0;
                for sample in &self.samples[s..e] {
                    acc += scale * sample.reward;
                    scale *= gamma;
                }
                acc
            })
            .sum();
        total / self.bounds.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrpoConfig {
    /// Trust-region radius on the batch-mean KL divergence.
    pub kl_step: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub cg_iters: usize,
    pub cg_tol: f64,
    pub cg_damping: f64,
    pub backtrack_ratio: f64,
    pub backtrack_steps: usize,
    pub value_epochs: usize,
    pub value_lr: f64,
    pub value_minibatch: usize,
}

impl Default for TrpoConfig {
    fn default() -> Self {
        Self {
            kl_step: 0.01,
            discount: 0.99,
            gae_lambda: 0.96,
            cg_iters: 10,
            cg_tol: 1e-10,
            cg_damping: 0.1,
            backtrack_ratio: 0.8,
            backtrack_steps: 15,
            value_epochs: 5,
            value_lr: 1e-3,
            value_minibatch: 64,
        }
    }
}

/// Per-iteration optimizer diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub mean_return: f64,
    pub mean_kl: f64,
    pub surrogate_improvement: f64,
    pub policy_entropy: f64,
    /// True when no candidate step satisfied the constraints (or the
    /// gradient vanished) and the policy parameters were left unchanged.
    pub skipped: bool,
    pub accepted_exponent: Option<usize>,
    pub grad_norm: f64,
    pub value_pre_mse: f64,
    pub value_post_mse: f64,
}

impl StepStats {
    pub fn all_finite(&self) -> bool {
        [
            self.mean_return,
            self.mean_kl,
            self.surrogate_improvement,
            self.policy_entropy,
            self.grad_norm,
            self.value_pre_mse,
            self.value_post_mse,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// One full trust-region update:
/// advantages (GAE, batch-normalized) -> surrogate gradient -> conjugate
/// gradient on damped Fisher-vector products -> step scaled to the trust
/// region -> backtracking line search -> value-baseline fit.
pub fn trpo_step(
    policy: &mut PolicyNet,
    value: &mut ValueNet,
    value_adam: &mut AdamState,
    batch: &Batch,
    cfg: &TrpoConfig,
    value_rng: &mut ChaCha8Rng,
) -> StepStats {
    assert!(!batch.samples.is_empty(), "empty batch");
    let mean_return = batch.mean_return(cfg.discount);

    // Values for every step plus the terminal bootstrap (zero: all episodes
    // end at their true horizon).
    let values_flat: Vec<f64> = batch
        .samples
        .par_iter()
        .map(|s| value.predict(&s.state_in, &s.belief_in))
        .collect();
    let mut rewards_by_traj = Vec::with_capacity(batch.bounds.len());
    let mut values_by_traj = Vec::with_capacity(batch.bounds.len());
    for &(s, e) in &batch.bounds {
        rewards_by_traj.push(
            batch.samples[s..e]
                .iter()
                .map(|x| x.reward)
                .collect::<Vec<f64>>(),
        );
        let mut v = values_flat[s..e].to_vec();
        v.push(0.0);
        values_by_traj.push(v);
    }
    let reward_slices: Vec<&[f64]> = rewards_by_traj.iter().map(Vec::as_slice).collect();
    let value_slices: Vec<&[f64]> = values_by_traj.iter().map(Vec::as_slice).collect();
    let (adv_by_traj, targets_by_traj) =
        compute_gae(&reward_slices, &value_slices, cfg.discount, cfg.gae_lambda);
    let mut advantages: Vec<f64> = adv_by_traj.into_iter().flatten().collect();
    normalize_advantages(&mut advantages);
    let targets: Vec<f64> = targets_by_traj.into_iter().flatten().collect();

    let cache = build_cache(policy, batch);
    let policy_entropy = fvp::mean_entropy(&cache);

    let grad = surrogate_gradient(policy, batch, &cache, &advantages);
    let grad_norm = cg::dot(&grad, &grad).sqrt();

    let mut stats = StepStats {
        mean_return,
        mean_kl: 0.0,
        surrogate_improvement: 0.0,
        policy_entropy,
        skipped: true,
        accepted_exponent: None,
        grad_norm,
        value_pre_mse: 0.0,
        value_post_mse: 0.0,
    };

    if grad_norm > 0.0 && grad_norm.is_finite() {
        let direction = conjugate_gradient(
            |v| fisher_vector_product(policy, batch, &cache, v, cfg.cg_damping),
            &grad,
            cfg.cg_iters,
            cfg.cg_tol,
        );
        let hd = fisher_vector_product(policy, batch, &cache, &direction, cfg.cg_damping);
        let dhd = cg::dot(&direction, &hd);
        if dhd > 0.0 && dhd.is_finite() {
            // Quadratic model reaches the KL limit at the full step.
            let full_scale = (2.0 * cfg.kl_step / dhd).sqrt();
            let old_params = policy.flatten();
            let eval = |beta: f64| {
                let mut candidate = policy.clone();
                let params: Vec<f64> = old_params
                    .iter()
                    .zip(&direction)
                    .map(|(p, d)| p + beta * full_scale * d)
                    .collect();
                candidate.set_from_flat(&params);
                evaluate_policy(&candidate, batch, &cache, &advantages)
            };
            if let Some((beta, exponent, kl, improvement)) = backtracking_line_search(
                eval,
                cfg.kl_step,
                cfg.backtrack_ratio,
                cfg.backtrack_steps,
            ) {
                let params: Vec<f64> = old_params
                    .iter()
                    .zip(&direction)
                    .map(|(p, d)| p + beta * full_scale * d)
                    .collect();
                policy.set_from_flat(&params);
                stats.mean_kl = kl;
                stats.surrogate_improvement = improvement;
                stats.skipped = false;
                stats.accepted_exponent = Some(exponent);
            }
        }
    }

    let inputs: Vec<(&[f64], &[f64])> = batch
        .samples
        .iter()
        .map(|s| (s.state_in.as_slice(), s.belief_in.as_slice()))
        .collect();
    let fit = fit_baseline(
        value,
        value_adam,
        &inputs,
        &targets,
        FitConfig { epochs: cfg.value_epochs, lr: cfg.value_lr, minibatch: cfg.value_minibatch },
        value_rng,
    );
    stats.value_pre_mse = fit.pre_mse;
    stats.value_post_mse = fit.post_mse;
    stats
}
