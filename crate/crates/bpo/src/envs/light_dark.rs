//! Light-Dark: an agent with an uncertain 2-D position must reach a known
//! goal. Observations of the position are Gaussian with variance growing
//! quadratically with distance from the light line at x = 5, so accurate
//! localization requires detouring toward the light. The belief is a
//! diagonal Gaussian maintained by an extended Kalman filter.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bamdp::{standard_normal, Action, ActionSpace, BamdpSpec, LatentGrid, LatentPrior};
use crate::belief::Belief;
use crate::error::FilterError;
use crate::filters::ekf_update;

use super::{BeliefEnv, ResetOutcome, StepOutcome, Transition};

pub const LIGHT_X: f64 = 5.0;
const TERMINAL_PENALTY: f64 = -5000.0;
const INITIAL_MEAN: [f64; 2] = [2.0, 2.0];
const INITIAL_VAR: f64 = 2.25;
const GOAL_X: (f64, f64) = (0.0, 2.0);
const GOAL_Y: (f64, f64) = (-2.0, 4.0);
const START_X: (f64, f64) = (2.0, 4.0);
const START_Y: (f64, f64) = (-2.0, 4.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightDarkConfig {
    /// Additive floor of the observation-noise variance; must be positive.
    pub noise_floor: f64,
    /// Per-coordinate action bound applied before execution.
    pub action_clip: f64,
}

impl Default for LightDarkConfig {
    fn default() -> Self {
        Self {
            noise_floor: 0.5,
            action_clip: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LightDarkEnv {
    spec: BamdpSpec,
    config: LightDarkConfig,
    position: [f64; 2],
    goal: [f64; 2],
    t: usize,
}

impl LightDarkEnv {
    pub fn new(config: LightDarkConfig, discount: f64, horizon: usize) -> Self {
        assert!(config.noise_floor > 0.0, "noise floor must be positive");
        assert!(config.action_clip > 0.0, "action clip must be positive");
        let prior = vec![
            LatentPrior::Uniform { low: START_X.0, high: START_X.1 },
            LatentPrior::Uniform { low: START_Y.0, high: START_Y.1 },
        ];
        let spec = BamdpSpec {
            state_dim: 2,
            action_space: ActionSpace::Continuous { dim: 2, clip: config.action_clip },
            latent_prior: prior,
            discount,
            horizon,
        };
        spec.validate().unwrap();
        Self {
            spec,
            config,
            position: INITIAL_MEAN,
            goal: [1.0, 1.0],
            t: 0,
        }
    }

    /// Observation-noise variance at horizontal position `x`, minimized on
    /// the light line.
    pub fn noise_variance(&self, x: f64) -> f64 {
        0.5 * (x - LIGHT_X).powi(2) + self.config.noise_floor
    }

    /// Density of one observation coordinate given the true position's x.
    pub fn obs_density_1d(&self, x_true: f64, coord_true: f64, coord_obs: f64) -> f64 {
        let var = self.noise_variance(x_true);
        let d = coord_obs - coord_true;
        (-d * d / (2.0 * var)).exp() / (std::f64::consts::TAU * var).sqrt()
    }

    fn clip(&self, a: &[f64]) -> [f64; 2] {
        let c = self.config.action_clip;
        [a[0].clamp(-c, c), a[1].clamp(-c, c)]
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    /// True position; diagnostics only, never part of a policy input.
    pub fn position(&self) -> [f64; 2] {
        self.position
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

impl BeliefEnv for LightDarkEnv {
    fn spec(&self) -> &BamdpSpec {
        &self.spec
    }

    fn grid(&self) -> Option<&LatentGrid> {
        None
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn momentary_dim(&self) -> usize {
        4
    }

    fn initial_belief(&self) -> Belief {
        Belief::Gaussian {
            mean: INITIAL_MEAN.to_vec(),
            var: vec![INITIAL_VAR, INITIAL_VAR],
        }
    }

    fn reset(&mut self, latent: &[f64], rng: &mut dyn RngCore) -> ResetOutcome {
        self.position = [latent[0], latent[1]];
        let (ux, uy): (f64, f64) = (rng.gen(), rng.gen());
        self.goal = [
            GOAL_X.0 + (GOAL_X.1 - GOAL_X.0) * ux,
            GOAL_Y.0 + (GOAL_Y.1 - GOAL_Y.0) * uy,
        ];
        self.t = 0;
        // No observation arrives before the first action; the initial belief
        // mean stands in for it on the momentary path.
        let momentary = vec![INITIAL_MEAN[0], INITIAL_MEAN[1], self.goal[0], self.goal[1]];
        ResetOutcome {
            state: self.goal.to_vec(),
            momentary,
        }
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> StepOutcome {
        let a = self.clip(action.vector());
        let before = self.position;
        self.position = [before[0] + a[0], before[1] + a[1]];
        self.t += 1;

        let std = self.noise_variance(self.position[0]).sqrt();
        let obs = vec![
            self.position[0] + std * standard_normal(rng),
            self.position[1] + std * standard_normal(rng),
        ];

        let mut reward =
            -0.5 * (sq_dist(&before, &self.goal) + a[0] * a[0] + a[1] * a[1]);
        let done = self.t >= self.spec.horizon;
        if done {
            reward += TERMINAL_PENALTY * sq_dist(&self.position, &self.goal);
        }

        StepOutcome {
            reward,
            state: self.goal.to_vec(),
            momentary: vec![obs[0], obs[1], self.goal[0], self.goal[1]],
            obs,
            done,
        }
    }

    fn update_belief(&self, belief: &Belief, tr: &Transition) -> Result<Belief, FilterError> {
        let (mean, var) = match belief {
            Belief::Gaussian { mean, var } => (mean, var),
            _ => unreachable!("light-dark beliefs are Gaussian"),
        };
        let action = tr.action.vector();
        ekf_update(
            mean,
            var,
            action,
            tr.obs,
            |m, a| {
                let c = self.clip(a);
                vec![m[0] + c[0], m[1] + c[1]]
            },
            |predicted| {
                let v = self.noise_variance(predicted[0]);
                vec![v, v]
            },
        )
    }

    fn clone_box(&self) -> Box<dyn BeliefEnv> {
        Box::new(self.clone())
    }
}
