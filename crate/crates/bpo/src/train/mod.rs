//! The outer training loop for every algorithm variant, policy evaluation,
//! best-of-seeds orchestration, and the Tiger belief-space oracle.

pub mod oracle;
pub mod sweep;

pub use oracle::{tiger_value_iteration, TigerAction, TigerOracle};
pub use sweep::{discretization_sweep, SweepRow};

use std::time::Instant;

use rayon::prelude::*;

use crate::bamdp::{derive_stream, sample_latent, stream, LatentPrior};
use crate::config::{Algorithm, RunConfig};
use crate::envs::BeliefEnv;
use crate::error::TrainError;
use crate::filters::belief_entropy;
use crate::net::{NetConfig, PolicyHead, PolicyNet, ValueNet};
use crate::sim::{collect_batch, simulate, InputMode, SimOptions, Trajectory};
use crate::trpo::{trpo_step, AdamState, Batch};

impl Algorithm {
    /// Policy input mode of each variant.
    pub fn input_mode(self) -> InputMode {
        match self {
            Algorithm::Bpo | Algorithm::BpoMinus => InputMode::Belief,
            Algorithm::Upmle => InputMode::MleEstimate,
            Algorithm::RobustEnsemble => InputMode::Momentary,
            Algorithm::Nominal => InputMode::StateOnly,
        }
    }

    pub fn uses_encoders(self) -> bool {
        !matches!(self, Algorithm::BpoMinus)
    }

    /// Nominal training pins the latent to the prior's center instead of
    /// resampling per episode.
    pub fn fixed_latent(self, priors: &[LatentPrior]) -> Option<Vec<f64>> {
        match self {
            Algorithm::Nominal => Some(
                priors
                    .iter()
                    .map(|p| match p {
                        LatentPrior::Uniform { low, high } => 0.5 * (low + high),
                        LatentPrior::Finite(support) => support[(support.len() - 1) / 2],
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// One diagnostics row per training iteration.
#[derive(Debug, Clone, Copy)]
pub struct IterationRow {
    pub iteration: usize,
    pub mean_return: f64,
    pub mean_kl: f64,
    pub surrogate_improvement: f64,
    pub policy_entropy: f64,
    pub belief_entropy_mean: f64,
    pub wallclock_s: f64,
    pub skipped: bool,
    pub zero_likelihood_steps: u64,
}

/// Diagnostics CSV header; wallclock is the only column allowed to differ
/// between identically seeded runs.
pub const DIAGNOSTICS_HEADER: &str =
    "iteration,mean_return,mean_kl,surrogate_improvement,policy_entropy,belief_entropy_mean,wallclock_s";

pub fn diagnostics_csv_row(row: &IterationRow) -> String {
    format!(
        "{},{},{},{},{},{},{:.3}",
        row.iteration,
        row.mean_return,
        row.mean_kl,
        row.surrogate_improvement,
        row.policy_entropy,
        row.belief_entropy_mean,
        row.wallclock_s
    )
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the iteration with the highest batch mean return.
    pub policy: PolicyNet,
    pub value: ValueNet,
    pub best_iteration: usize,
    pub best_mean_return: f64,
    pub diagnostics: Vec<IterationRow>,
    pub total_steps: u64,
    pub total_filter_calls: u64,
}

/// Construct the policy/value pair for a config and seed.
pub fn init_nets(config: &RunConfig, env: &dyn BeliefEnv, seed: u64) -> (PolicyNet, ValueNet) {
    let mode = config.run.algorithm.input_mode();
    let (state_dim, belief_dim) = crate::sim::policy_input_dims(env, mode);
    let (head, out_dim) = match env.spec().action_space {
        crate::bamdp::ActionSpace::Discrete(n) => (PolicyHead::Categorical, n),
        crate::bamdp::ActionSpace::Continuous { dim, .. } => (PolicyHead::Gaussian, dim),
    };
    let encoders = config.run.algorithm.uses_encoders();
    let net_cfg = NetConfig {
        state_dim,
        belief_dim,
        hidden: config.net.hidden,
        encoders,
        out_dim,
    };
    let value_cfg = NetConfig { out_dim: 1, ..net_cfg };
    let mut rng = derive_stream(seed, stream::INIT, 0, 0);
    let policy = PolicyNet::init(net_cfg, head, &mut rng);
    let value = ValueNet::init(value_cfg, &mut rng);
    (policy, value)
}

fn sim_options(config: &RunConfig) -> SimOptions {
    let mut opts = SimOptions::new(config.run.algorithm.input_mode());
    if config.train.freeze_belief {
        opts.freeze_belief = true;
    }
    opts
}

fn mean_belief_entropy(trajs: &[Trajectory]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for traj in trajs {
        for b in &traj.beliefs {
            total += belief_entropy(b);
            count += 1;
        }
    }
    total / count.max(1) as f64
}

/// Train one seed: per iteration, sample latent MDPs, simulate with belief
/// updates, then take a trust-region step. The returned parameters are those
/// of the iteration whose sampling batch had the highest mean return.
pub fn train(config: &RunConfig, seed: u64) -> Result<TrainOutcome, TrainError> {
    config.validate().map_err(|e| {
        TrainError::Spec(crate::error::SpecError::new(e.to_string()))
    })?;
    let env = config.make_env();
    let (mut policy, mut value) = init_nets(config, env.as_ref(), seed);
    let mut value_adam = AdamState::new(value.net.param_count());
    let opts = sim_options(config);
    let trpo_cfg = config.trpo_config();
    let fixed_latent = config
        .run
        .algorithm
        .fixed_latent(&env.spec().latent_prior);
    let mode = config.run.algorithm.input_mode();

    let start = Instant::now();
    let mut best: Option<(f64, usize, Vec<f64>, ValueNet)> = None;
    let mut diagnostics = Vec::with_capacity(config.train.n_itr);
    let mut total_steps = 0u64;
    let mut total_filter_calls = 0u64;

    for iteration in 0..config.train.n_itr {
        let trajs = collect_iteration(
            env.as_ref(),
            &policy,
            &opts,
            seed,
            iteration as u64,
            config.train.batch_size,
            fixed_latent.as_deref(),
        )
        .map_err(|source| TrainError::Simulation { iteration, source })?;

        total_steps += trajs.iter().map(|t| t.len() as u64).sum::<u64>();
        total_filter_calls += trajs.iter().map(|t| t.filter_calls as u64).sum::<u64>();
        let zero_likelihood_steps: u64 =
            trajs.iter().map(|t| t.zero_likelihood_steps as u64).sum();
        let belief_entropy_mean = mean_belief_entropy(&trajs);

        let batch = Batch::from_trajectories(&trajs, mode, env.as_ref());
        let sampling_params = policy.flatten();
        let mut value_rng = derive_stream(seed, stream::VALUE_FIT, iteration as u64, 0);
        let stats = trpo_step(&mut policy, &mut value, &mut value_adam, &batch, &trpo_cfg, &mut value_rng);
        if !stats.all_finite() {
            return Err(TrainError::NonFiniteDiagnostic {
                iteration,
                quantity: "optimizer statistics".into(),
            });
        }

        // The batch return measures the sampling-time parameters.
        if best.as_ref().is_none_or(|(r, ..)| stats.mean_return > *r) {
            best = Some((stats.mean_return, iteration, sampling_params, value.clone()));
        }

        diagnostics.push(IterationRow {
            iteration,
            mean_return: stats.mean_return,
            mean_kl: stats.mean_kl,
            surrogate_improvement: stats.surrogate_improvement,
            policy_entropy: stats.policy_entropy,
            belief_entropy_mean,
            wallclock_s: start.elapsed().as_secs_f64(),
            skipped: stats.skipped,
            zero_likelihood_steps,
        });
    }

    let (best_mean_return, best_iteration, best_params, best_value) =
        best.expect("n_itr >= 1 guarantees one iteration");
    policy.set_from_flat(&best_params);
    Ok(TrainOutcome {
        policy,
        value: best_value,
        best_iteration,
        best_mean_return,
        diagnostics,
        total_steps,
        total_filter_calls,
    })
}

fn collect_iteration(
    env: &dyn BeliefEnv,
    policy: &PolicyNet,
    opts: &SimOptions,
    seed: u64,
    iteration: u64,
    batch_size: usize,
    fixed_latent: Option<&[f64]>,
) -> Result<Vec<Trajectory>, crate::error::SimError> {
    match fixed_latent {
        None => collect_batch(env, policy, opts, seed, iteration, batch_size),
        Some(latent) => {
            let horizon = env.spec().horizon;
            let n_episodes = batch_size.div_ceil(horizon).max(1);
            (0..n_episodes)
                .into_par_iter()
                .map(|j| {
                    let mut local = env.clone_box();
                    let mut rng = derive_stream(seed, stream::ROLLOUT, iteration, j as u64);
                    // Consume the latent draw so streams align with the
                    // prior-sampling variants.
                    let _ = sample_latent(local.spec(), &mut rng);
                    simulate(local.as_mut(), policy, opts, latent, &mut rng)
                })
                .collect()
        }
    }
}

/// Evaluation summary over fresh episodes.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mean: f64,
    /// Half-width of the 95% confidence interval; `None` when undefined
    /// (fewer than two episodes).
    pub ci95: Option<f64>,
    pub returns: Vec<f64>,
}

pub fn confidence_interval(returns: &[f64]) -> Option<f64> {
    if returns.len() < 2 {
        return None;
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some(1.96 * (var / n).sqrt())
}

/// Evaluate with the stochastic policy: fresh latent draws per episode on
/// streams derived from `(eval_seed, episode)`, returns discounted by the
/// environment's discount.
pub fn evaluate(
    policy: &PolicyNet,
    config: &RunConfig,
    n_episodes: usize,
    eval_seed: u64,
) -> Result<EvalReport, crate::error::SimError> {
    let template = config.make_env();
    let opts = sim_options(config);
    let gamma = config.train.discount;
    let returns: Vec<f64> = (0..n_episodes)
        .into_par_iter()
        .map(|ep| {
            let mut env = template.clone_box();
            let mut rng = derive_stream(eval_seed, stream::EVAL, ep as u64, 0);
            let latent = sample_latent(env.spec(), &mut rng);
            simulate(env.as_mut(), policy, &opts, &latent, &mut rng)
                .map(|t| t.discounted_return(gamma))
        })
        .collect::<Result<_, _>>()?;
    Ok(EvalReport { mean: returns.iter().sum::<f64>() / returns.len().max(1) as f64, ci95: confidence_interval(&returns), returns })
}

/// One trained seed with its evaluation.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub outcome: TrainOutcome,
    pub eval: EvalReport,
}

#[derive(Debug, Clone)]
pub struct MultiSeedOutcome {
    pub runs: Vec<SeedRun>,
    /// Index into `runs` of the best seed by mean evaluation return.
    pub best: usize,
}

impl MultiSeedOutcome {
    pub fn best_run(&self) -> &SeedRun {
        &self.runs[self.best]
    }
}

/// Train `n_seeds` consecutive seeds and pick the best by mean evaluation
/// return, mirroring best-of-seeds reporting.
pub fn train_best_of_seeds(config: &RunConfig) -> Result<MultiSeedOutcome, TrainError> {
    let seeds: Vec<u64> = (0..config.run.n_seeds as u64)
        .map(|i| config.run.seed.wrapping_add(i))
        .collect();
    let mut runs = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let outcome = train(config, seed)?;
        let eval = evaluate(&outcome.policy, config, config.run.eval_episodes, seed)
            .map_err(|source| TrainError::Simulation { iteration: usize::MAX, source })?;
        runs.push(SeedRun { seed, outcome, eval });
    }
    let best = runs
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.eval.mean.partial_cmp(&b.eval.mean).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(MultiSeedOutcome { runs, best })
}
