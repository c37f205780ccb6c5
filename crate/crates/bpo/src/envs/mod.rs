//! Benchmark environments. Each environment owns its latent
//! parameterization, reward model, and the likelihood (or dynamics/noise)
//! functions that drive its Bayes filter.

mod chain;
mod light_dark;
mod tiger;

pub use chain::{ChainCoupling, ChainEnv};
pub use light_dark::{LightDarkConfig, LightDarkEnv, LIGHT_X};
pub use tiger::TigerEnv;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bamdp::{Action, BamdpSpec, LatentGrid};
use crate::belief::Belief;
use crate::error::FilterError;

/// Observable output of a reset.
#[derive(Debug, Clone)]
pub struct ResetOutcome {
    /// Observable-state features fed to the policy's state path.
    pub state: Vec<f64>,
    /// Most-recent-observation features (the belief-free baselines' input).
    pub momentary: Vec<f64>,
}

/// Observable output of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub state: Vec<f64>,
    pub momentary: Vec<f64>,
    /// Raw observation consumed by the Bayes filter; empty when the next
    /// state itself is the evidence.
    pub obs: Vec<f64>,
    pub done: bool,
}

/// One recorded transition, sufficient to replay the belief update offline.
#[derive(Debug, Clone)]
pub struct Transition<'a> {
    pub state: &'a [f64],
    pub action: &'a Action,
    pub next_state: &'a [f64],
    pub obs: &'a [f64],
}

/// A latent-parameterized environment paired with its Bayes filter.
///
/// `update_belief` is a pure function of `(belief, transition)` so that
/// replaying a recorded trajectory through it reproduces the recorded
/// belief sequence exactly.
pub trait BeliefEnv: Send + Sync {
    fn spec(&self) -> &BamdpSpec;
    /// Latent grid backing categorical beliefs; `None` for Gaussian beliefs.
    fn grid(&self) -> Option<&LatentGrid>;
    fn state_dim(&self) -> usize;
    fn momentary_dim(&self) -> usize;
    fn initial_belief(&self) -> Belief;
    fn reset(&mut self, latent: &[f64], rng: &mut dyn RngCore) -> ResetOutcome;
    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> StepOutcome;
    fn update_belief(&self, belief: &Belief, tr: &Transition) -> Result<Belief, FilterError>;
    fn clone_box(&self) -> Box<dyn BeliefEnv>;
}

impl Clone for Box<dyn BeliefEnv> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Environment identifiers accepted by configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvId {
    Tiger,
    Chain,
    LightDark,
}

impl std::fmt::Display for EnvId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvId::Tiger => write!(f, "tiger"),
            EnvId::Chain => write!(f, "chain"),
            EnvId::LightDark => write!(f, "light_dark"),
        }
    }
}
