//! Belief-augmented simulation: roll a stochastic policy through a sampled
//! latent MDP while a Bayes filter tracks the posterior, recording
//! everything needed for policy optimization and offline replay.

use std::io::Write;

use rayon::prelude::*;

use crate::bamdp::{derive_stream, sample_latent, stream, Action, LatentPrior};
use crate::belief::Belief;
use crate::envs::{BeliefEnv, Transition};
use crate::error::{FilterError, SimError};
use crate::filters::mle_estimate;
use crate::net::dist;
use crate::net::PolicyNet;

/// What the policy sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    /// State features plus the full belief vector.
    Belief,
    /// State features plus the filter's point estimate, min-max normalized
    /// to the latent range.
    MleEstimate,
    /// Only the most recent observation features; no belief path.
    Momentary,
    /// Only the state features; no belief path.
    StateOnly,
}

impl InputMode {
    pub fn uses_filter(self) -> bool {
        matches!(self, InputMode::Belief | InputMode::MleEstimate)
    }
}

/// Reaction to a zero-likelihood filter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnZeroLikelihood {
    /// Abort the simulation with the failing step index.
    Strict,
    /// Keep the prior belief and count the event.
    KeepPrior,
}

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub mode: InputMode,
    pub on_zero_likelihood: OnZeroLikelihood,
    /// Ablation switch: never call the filter, leaving the belief at b0.
    pub freeze_belief: bool,
}

impl SimOptions {
    pub fn new(mode: InputMode) -> Self {
        Self {
            mode,
            on_zero_likelihood: OnZeroLikelihood::KeepPrior,
            freeze_belief: !mode.uses_filter(),
        }
    }

    pub fn strict(mut self) -> Self {
        self.on_zero_likelihood = OnZeroLikelihood::Strict;
        self
    }
}

/// One simulated episode. Sequences of states, observation features, and
/// beliefs have one more entry than actions/rewards/log-probs. The true
/// latent is recorded for diagnostics only; no policy input path reads it.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub momentary: Vec<Vec<f64>>,
    pub beliefs: Vec<Belief>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub latent: Vec<f64>,
    pub terminated: bool,
    pub zero_likelihood_steps: u32,
    pub filter_calls: u32,
}

impl Trajectory {
    /// Number of transitions.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        let mut total = 0.0;
        let mut scale = 1.0;
        for &r in &self.rewards {
            total += scale * r;
            scale *= gamma;
        }
        total
    }
}

/// Min-max normalize a latent estimate to its prior's range.
pub fn normalize_latent(estimate: &[f64], priors: &[LatentPrior]) -> Vec<f64> {
    estimate
        .iter()
        .zip(priors)
        .map(|(&x, prior)| {
            let (lo, hi) = prior.bounds();
            if hi > lo {
                (x - lo) / (hi - lo)
            } else {
                x - lo
            }
        })
        .collect()
}

/// Policy input widths `(state path, belief path)` for a mode on an env.
pub fn policy_input_dims(env: &dyn BeliefEnv, mode: InputMode) -> (usize, usize) {
    match mode {
        InputMode::Belief => (env.state_dim(), env.initial_belief().feature_dim()),
        InputMode::MleEstimate => (env.state_dim(), env.spec().latent_dim()),
        InputMode::Momentary => (env.momentary_dim(), 0),
        InputMode::StateOnly => (env.state_dim(), 0),
    }
}

/// Assemble the `(state path, belief path)` inputs for one step.
pub fn policy_inputs(
    mode: InputMode,
    state: &[f64],
    momentary: &[f64],
    belief: &Belief,
    env: &dyn BeliefEnv,
) -> (Vec<f64>, Vec<f64>) {
    match mode {
        InputMode::Belief => (state.to_vec(), belief.features()),
        InputMode::MleEstimate => {
            let mle = mle_estimate(belief, env.grid());
            (
                state.to_vec(),
                normalize_latent(&mle, &env.spec().latent_prior),
            )
        }
        InputMode::Momentary => (momentary.to_vec(), Vec::new()),
        InputMode::StateOnly => (state.to_vec(), Vec::new()),
    }
}

/// Run one episode of at most `horizon` steps. Per step: sample an action
/// from the policy at the current `(state, belief)`, execute it, then update
/// the belief from the observed transition.
pub fn simulate(
    env: &mut dyn BeliefEnv,
    policy: &PolicyNet,
    opts: &SimOptions,
    latent: &[f64],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Trajectory, SimError> {
    let horizon = env.spec().horizon;
    let reset = env.reset(latent, rng);
    let b0 = env.initial_belief();
    debug_assert!(b0.validate().is_ok());

    let mut traj = Trajectory {
        states: Vec::with_capacity(horizon + 1),
        momentary: Vec::with_capacity(horizon + 1),
        beliefs: Vec::with_capacity(horizon + 1),
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        log_probs: Vec::with_capacity(horizon),
        latent: latent.to_vec(),
        terminated: false,
        zero_likelihood_steps: 0,
        filter_calls: 0,
    };
    traj.states.push(reset.state);
    traj.momentary.push(reset.momentary);
    traj.beliefs.push(b0);

    for t in 0..horizon {
        let (state_in, belief_in) = policy_inputs(
            opts.mode,
            &traj.states[t],
            &traj.momentary[t],
            &traj.beliefs[t],
            env,
        );
        let dist = policy.forward(&state_in, &belief_in);
        if !dist.is_finite() {
            return Err(SimError::NonFinitePolicy { step: t });
        }
        let action = dist::sample(&dist, rng);
        let log_prob = dist::log_prob(&dist, &action);
        let out = env.step(&action, rng);

        let belief = if opts.freeze_belief {
            traj.beliefs[t].clone()
        } else {
            traj.filter_calls += 1;
            let tr = Transition {
                state: &traj.states[t],
                action: &action,
                next_state: &out.state,
                obs: &out.obs,
            };
            match env.update_belief(&traj.beliefs[t], &tr) {
                Ok(b) => b,
                Err(FilterError::ZeroLikelihood { .. })
                    if opts.on_zero_likelihood == OnZeroLikelihood::KeepPrior =>
                {
                    traj.zero_likelihood_steps += 1;
                    traj.beliefs[t].clone()
                }
                Err(source) => return Err(SimError::Filter { step: t, source }),
            }
        };
        debug_assert!(belief.validate().is_ok());

        traj.actions.push(action);
        traj.rewards.push(out.reward);
        traj.log_probs.push(log_prob);
        traj.states.push(out.state);
        traj.momentary.push(out.momentary);
        traj.beliefs.push(belief);

        if out.done {
            traj.terminated = true;
            break;
        }
    }
    Ok(traj)
}

/// Collect enough episodes to cover `min_steps` transitions. Each episode
/// owns an environment clone and a random stream derived from
/// `(seed, iteration, episode index)`, so the batch is identical for any
/// worker count; episodes are returned in index order.
pub fn collect_batch(
    env: &dyn BeliefEnv,
    policy: &PolicyNet,
    opts: &SimOptions,
    seed: u64,
    iteration: u64,
    min_steps: usize,
) -> Result<Vec<Trajectory>, SimError> {
    let horizon = env.spec().horizon;
    let n_episodes = min_steps.div_ceil(horizon).max(1);
    (0..n_episodes)
        .into_par_iter()
        .map(|j| {
            let mut local = env.clone_box();
            let mut rng = derive_stream(seed, stream::ROLLOUT, iteration, j as u64);
            let latent = sample_latent(local.spec(), &mut rng);
            simulate(local.as_mut(), policy, opts, &latent, &mut rng)
        })
        .collect()
}

/// Dump one episode as CSV: a JSON header line recording the latent and the
/// stream coordinates, then per-step rows. The final row carries the
/// terminal state/belief and empty action fields.
pub fn write_trajectory_csv(
    w: &mut impl Write,
    traj: &Trajectory,
    seed: u64,
    episode: u64,
) -> std::io::Result<()> {
    let latent: Vec<String> = traj.latent.iter().map(|x| x.to_string()).collect();
    writeln!(
        w,
        "# {{\"latent\": [{}], \"seed\": {}, \"episode\": {}}}",
        latent.join(", "),
        seed,
        episode
    )?;

    let state_dim = traj.states[0].len();
    let belief_dim = traj.beliefs[0].feature_dim();
    let action_cols: Vec<String> = match &traj.actions.first() {
        Some(Action::Continuous(v)) => (0..v.len()).map(|i| format!("action_{i}")).collect(),
        _ => vec!["action".to_string()],
    };
    let mut header = vec!["t".to_string()];
    header.extend((0..state_dim).map(|i| format!("state_{i}")));
    header.extend((0..belief_dim).map(|i| format!("belief_{i}")));
    header.extend(action_cols.iter().cloned());
    header.push("reward".into());
    header.push("log_prob".into());
    writeln!(w, "{}", header.join(","))?;

    for t in 0..traj.states.len() {
        let mut row = vec![t.to_string()];
        row.extend(traj.states[t].iter().map(|x| x.to_string()));
        row.extend(traj.beliefs[t].features().iter().map(|x| x.to_string()));
        if t < traj.len() {
            match &traj.actions[t] {
                Action::Discrete(i) => row.push(i.to_string()),
                Action::Continuous(v) => row.extend(v.iter().map(|x| x.to_string())),
            }
            row.push(traj.rewards[t].to_string());
            row.push(traj.log_probs[t].to_string());
        } else {
            row.extend(std::iter::repeat_n(String::new(), action_cols.len() + 2));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
