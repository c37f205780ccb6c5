//! Run configuration: a TOML file with one section per subsystem, dotted
//! command-line overrides, and per-environment defaults. Unknown keys and
//! type mismatches are rejected with the offending key named.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::envs::{
    BeliefEnv, ChainCoupling, ChainEnv, EnvId, LightDarkConfig, LightDarkEnv, TigerEnv,
};
use crate::trpo::TrpoConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected key=value with a dotted key")]
    Override(String),
    #[error("invalid config value: {0}")]
    Value(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Belief-aware policy with independent state and belief encoders.
    Bpo,
    /// Same inputs, encoders bypassed: the raw state-belief concatenation
    /// feeds the policy trunk directly.
    BpoMinus,
    /// The filter's point estimate replaces the belief vector.
    Upmle,
    /// Belief-free robust ensemble baseline: the policy sees only the most
    /// recent observation; latent MDPs are still resampled per episode.
    RobustEnsemble,
    /// Trained on the single MDP at the latent prior's center.
    Nominal,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Bpo => "bpo",
            Algorithm::BpoMinus => "bpo_minus",
            Algorithm::Upmle => "upmle",
            Algorithm::RobustEnsemble => "robust_ensemble",
            Algorithm::Nominal => "nominal",
        };
        write!(f, "{s}")
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub run: RunSection,
    pub env: EnvSection,
    pub train: TrainSection,
    pub net: NetSection,
    pub trpo: TrpoSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub env: EnvId,
    pub algorithm: Algorithm,
    pub seed: u64,
    /// Train this many consecutive seeds and report the best by mean
    /// evaluation return.
    pub n_seeds: usize,
    pub eval_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSection {
    pub listen_accuracy: f64,
    pub chain_coupling: ChainCoupling,
    pub noise_floor: f64,
    pub action_clip: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub horizon: usize,
    /// Minimum transitions per iteration; episodes are whole, so the batch
    /// holds `ceil(batch_size / horizon)` episodes.
    pub batch_size: usize,
    pub n_itr: usize,
    pub discount: f64,
    pub gae_lambda: f64,
    /// Latent-grid bins per dimension for categorical beliefs.
    pub latent_bins: usize,
    /// Ablation: freeze the belief at the prior for the whole episode.
    pub freeze_belief: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSection {
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrpoSection {
    pub kl_step: f64,
    pub cg_iters: usize,
    pub cg_damping: f64,
    pub cg_tol: f64,
    pub backtrack_ratio: f64,
    pub backtrack_steps: usize,
    pub value_epochs: usize,
    pub value_lr: f64,
    pub value_minibatch: usize,
}

/// Partial configuration as written in a file; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: RawRun,
    #[serde(default)]
    env: RawEnv,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    net: RawNet,
    #[serde(default)]
    trpo: RawTrpo,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    env: Option<EnvId>,
    algorithm: Option<Algorithm>,
    seed: Option<u64>,
    n_seeds: Option<usize>,
    eval_episodes: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    listen_accuracy: Option<f64>,
    chain_coupling: Option<ChainCoupling>,
    noise_floor: Option<f64>,
    action_clip: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrain {
    horizon: Option<usize>,
    batch_size: Option<usize>,
    n_itr: Option<usize>,
    discount: Option<f64>,
    gae_lambda: Option<f64>,
    latent_bins: Option<usize>,
    freeze_belief: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNet {
    hidden: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrpo {
    kl_step: Option<f64>,
    cg_iters: Option<usize>,
    cg_damping: Option<f64>,
    cg_tol: Option<f64>,
    backtrack_ratio: Option<f64>,
    backtrack_steps: Option<usize>,
    value_epochs: Option<usize>,
    value_lr: Option<f64>,
    value_minibatch: Option<usize>,
}

impl RunConfig {
    /// Benchmark defaults per environment: Tiger trains 1000 iterations of
    /// 500-step batches at discount 0.95; Chain 500 iterations of 10000
    /// steps at discount 1; Light-Dark 10000 iterations of 400 steps over a
    /// 15-step horizon. Shared: KL step 0.01, GAE lambda 0.96, 32 hidden
    /// units, 10 latent bins per dimension, 1000 evaluation episodes, best
    /// of 5 seeds.
    pub fn defaults_for(env: EnvId) -> Self {
        let (horizon, batch_size, n_itr, discount) = match env {
            EnvId::Tiger => (100, 500, 1000, 0.95),
            EnvId::Chain => (100, 10_000, 500, 1.0),
            EnvId::LightDark => (15, 400, 10_000, 1.0),
        };
        Self {
            run: RunSection {
                env,
                algorithm: Algorithm::Bpo,
                seed: 0,
                n_seeds: 5,
                eval_episodes: 1000,
            },
            env: EnvSection {
                listen_accuracy: 0.85,
                chain_coupling: ChainCoupling::Tied,
                noise_floor: 0.5,
                action_clip: 1.0,
            },
            train: TrainSection {
                horizon,
                batch_size,
                n_itr,
                discount,
                gae_lambda: 0.96,
                latent_bins: 10,
                freeze_belief: false,
            },
            net: NetSection { hidden: 32 },
            trpo: TrpoSection {
                kl_step: 0.01,
                cg_iters: 10,
                cg_damping: 0.1,
                cg_tol: 1e-10,
                backtrack_ratio: 0.8,
                backtrack_steps: 15,
                value_epochs: 5,
                value_lr: 1e-3,
                value_minibatch: 64,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.train;
        let fail = |msg: String| Err(ConfigError::Value(msg));
        if !(0.0..=1.0).contains(&t.discount) {
            return fail(format!("train.discount must lie in [0, 1], got {}", t.discount));
        }
        if t.horizon == 0 {
            return fail("train.horizon must be at least 1".into());
        }
        if t.batch_size == 0 {
            return fail("train.batch_size must be at least 1".into());
        }
        if t.latent_bins == 0 {
            return fail("train.latent_bins must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&t.gae_lambda) {
            return fail(format!("train.gae_lambda must lie in [0, 1], got {}", t.gae_lambda));
        }
        if !(self.env.listen_accuracy > 0.5 && self.env.listen_accuracy <= 1.0) {
            return fail(format!(
                "env.listen_accuracy must lie in (0.5, 1], got {}",
                self.env.listen_accuracy
            ));
        }
        if self.env.noise_floor <= 0.0 {
            return fail(format!("env.noise_floor must be positive, got {}", self.env.noise_floor));
        }
        if self.env.action_clip <= 0.0 {
            return fail(format!("env.action_clip must be positive, got {}", self.env.action_clip));
        }
        if self.trpo.kl_step <= 0.0 {
            return fail(format!("trpo.kl_step must be positive, got {}", self.trpo.kl_step));
        }
        if !(0.0 < self.trpo.backtrack_ratio && self.trpo.backtrack_ratio < 1.0) {
            return fail(format!(
                "trpo.backtrack_ratio must lie in (0, 1), got {}",
                self.trpo.backtrack_ratio
            ));
        }
        if self.net.hidden == 0 {
            return fail("net.hidden must be at least 1".into());
        }
        if self.run.n_seeds == 0 {
            return fail("run.n_seeds must be at least 1".into());
        }
        Ok(())
    }

    /// Instantiate the configured environment.
    pub fn make_env(&self) -> Box<dyn BeliefEnv> {
        match self.run.env {
            EnvId::Tiger => Box::new(TigerEnv::new(
                self.env.listen_accuracy,
                self.train.discount,
                self.train.horizon,
            )),
            EnvId::Chain => Box::new(ChainEnv::new(
                self.env.chain_coupling,
                self.train.latent_bins,
                self.train.discount,
                self.train.horizon,
            )),
            EnvId::LightDark => Box::new(LightDarkEnv::new(
                LightDarkConfig {
                    noise_floor: self.env.noise_floor,
                    action_clip: self.env.action_clip,
                },
                self.train.discount,
                self.train.horizon,
            )),
        }
    }

    pub fn trpo_config(&self) -> TrpoConfig {
        TrpoConfig {
            kl_step: self.trpo.kl_step,
            discount: self.train.discount,
            gae_lambda: self.train.gae_lambda,
            cg_iters: self.trpo.cg_iters,
            cg_tol: self.trpo.cg_tol,
            cg_damping: self.trpo.cg_damping,
            backtrack_ratio: self.trpo.backtrack_ratio,
            backtrack_steps: self.trpo.backtrack_steps,
            value_epochs: self.trpo.value_epochs,
            value_lr: self.trpo.value_lr,
            value_minibatch: self.trpo.value_minibatch,
        }
    }
}

fn overlay(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let env = raw
        .run
        .env
        .ok_or_else(|| ConfigError::Value("run.env is required".into()))?;
    let mut cfg = RunConfig::defaults_for(env);
    macro_rules! set {
        ($($src:expr => $dst:expr),* $(,)?) => {
            $(if let Some(v) = $src { $dst = v; })*
        };
    }
    set! {
        raw.run.algorithm => cfg.run.algorithm,
        raw.run.seed => cfg.run.seed,
        raw.run.n_seeds => cfg.run.n_seeds,
        raw.run.eval_episodes => cfg.run.eval_episodes,
        raw.env.listen_accuracy => cfg.env.listen_accuracy,
        raw.env.chain_coupling => cfg.env.chain_coupling,
        raw.env.noise_floor => cfg.env.noise_floor,
        raw.env.action_clip => cfg.env.action_clip,
        raw.train.horizon => cfg.train.horizon,
        raw.train.batch_size => cfg.train.batch_size,
        raw.train.n_itr => cfg.train.n_itr,
        raw.train.discount => cfg.train.discount,
        raw.train.gae_lambda => cfg.train.gae_lambda,
        raw.train.latent_bins => cfg.train.latent_bins,
        raw.train.freeze_belief => cfg.train.freeze_belief,
        raw.net.hidden => cfg.net.hidden,
        raw.trpo.kl_step => cfg.trpo.kl_step,
        raw.trpo.cg_iters => cfg.trpo.cg_iters,
        raw.trpo.cg_damping => cfg.trpo.cg_damping,
        raw.trpo.cg_tol => cfg.trpo.cg_tol,
        raw.trpo.backtrack_ratio => cfg.trpo.backtrack_ratio,
        raw.trpo.backtrack_steps => cfg.trpo.backtrack_steps,
        raw.trpo.value_epochs => cfg.trpo.value_epochs,
        raw.trpo.value_lr => cfg.trpo.value_lr,
        raw.trpo.value_minibatch => cfg.trpo.value_minibatch,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Apply `a.b.c=value` overrides onto the parsed TOML tree.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (path, raw_value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.into()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.is_empty() || keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(spec.into()));
    }
    let value = parse_scalar(raw_value.trim());
    let mut current = table;
    for key in &keys[..keys.len() - 1] {
        current = current
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(spec.into()))?;
    }
    current.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_scalar(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.trim_matches('"').to_string())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut table, spec)?;
    }
    // Round-trip through text so deserialization errors carry the offending
    // key and line.
    let merged = toml::to_string(&table)
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    let raw: RawConfig =
        toml::from_str(&merged).map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    overlay(raw)
}

pub fn load_config(
    path: &std::path::Path,
    overrides: &[String],
) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, overrides)
}
