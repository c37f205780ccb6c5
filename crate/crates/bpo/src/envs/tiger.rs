//! Tiger: a tiger hides behind one of two doors. Listening yields a noisy
//! observation of its side for -1; opening the correct door pays +10, the
//! tiger's door costs -100. Opening any door resamples the tiger uniformly
//! and the episode continues to the horizon, so the belief resets to uniform.

use rand::{Rng, RngCore};

use crate::bamdp::{Action, ActionSpace, BamdpSpec, LatentGrid, LatentPrior};
use crate::belief::Belief;
use crate::error::FilterError;
use crate::filters::categorical_update;

use super::{BeliefEnv, ResetOutcome, StepOutcome, Transition};

pub const LISTEN: usize = 0;
pub const OPEN_LEFT: usize = 1;
pub const OPEN_RIGHT: usize = 2;

const LEFT: f64 = 0.0;
const RIGHT: f64 = 1.0;

const REWARD_LISTEN: f64 = -1.0;
const REWARD_CORRECT: f64 = 10.0;
const REWARD_TIGER: f64 = -100.0;

/// Observation encoding shared by `momentary` and the filter evidence:
/// one-hot over (hear-left, hear-right, none).
fn encode_obs(heard: Option<f64>) -> Vec<f64> {
    match heard {
        Some(LEFT) => vec![1.0, 0.0, 0.0],
        Some(_) => vec![0.0, 1.0, 0.0],
        None => vec![0.0, 0.0, 1.0],
    }
}

fn decode_obs(obs: &[f64]) -> Option<f64> {
    if obs[0] == 1.0 {
        Some(LEFT)
    } else if obs[1] == 1.0 {
        Some(RIGHT)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct TigerEnv {
    spec: BamdpSpec,
    grid: LatentGrid,
    listen_accuracy: f64,
    tiger: f64,
}

impl TigerEnv {
    pub fn new(listen_accuracy: f64, discount: f64, horizon: usize) -> Self {
        assert!(
            listen_accuracy > 0.5 && listen_accuracy <= 1.0,
            "listen accuracy must lie in (0.5, 1], got {listen_accuracy}"
        );
        let prior = vec![LatentPrior::Finite(vec![LEFT, RIGHT])];
        let grid = LatentGrid::new(&prior, 1).unwrap();
        let spec = BamdpSpec {
            state_dim: 1,
            action_space: ActionSpace::Discrete(3),
            latent_prior: prior,
            discount,
            horizon,
        };
        spec.validate().unwrap();
        Self {
            spec,
            grid,
            listen_accuracy,
            tiger: LEFT,
        }
    }

    pub fn listen_accuracy(&self) -> f64 {
        self.listen_accuracy
    }

    /// Likelihood of the recorded evidence under a grid cell. Listen
    /// evidence matches the cell's side with the listen accuracy; door
    /// openings are uninformative (the tiger is resampled afterwards, so the
    /// caller resets the belief to uniform instead).
    pub fn likelihood(&self, phi: &[f64], action: usize, obs: &[f64]) -> f64 {
        if action != LISTEN {
            return 1.0;
        }
        match decode_obs(obs) {
            Some(side) if side == phi[0] => self.listen_accuracy,
            Some(_) => 1.0 - self.listen_accuracy,
            None => 1.0,
        }
    }
}

impl BeliefEnv for TigerEnv {
    fn spec(&self) -> &BamdpSpec {
        &self.spec
    }

    fn grid(&self) -> Option<&LatentGrid> {
        Some(&self.grid)
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn momentary_dim(&self) -> usize {
        3
    }

    fn initial_belief(&self) -> Belief {
        Belief::uniform(2)
    }

    fn reset(&mut self, latent: &[f64], _rng: &mut dyn RngCore) -> ResetOutcome {
        self.tiger = latent[0];
        ResetOutcome {
            state: vec![0.0],
            momentary: encode_obs(None),
        }
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> StepOutcome {
        let a = action.index();
        let (reward, heard) = match a {
            LISTEN => {
                let correct = rng.gen::<f64>() < self.listen_accuracy;
                let side = if correct {
                    self.tiger
                } else {
                    1.0 - self.tiger
                };
                (REWARD_LISTEN, Some(side))
            }
            OPEN_LEFT | OPEN_RIGHT => {
                let opened = if a == OPEN_LEFT { LEFT } else { RIGHT };
                let reward = if opened == self.tiger {
                    REWARD_TIGER
                } else {
                    REWARD_CORRECT
                };
                // The tiger moves behind a uniformly random door and the
                // episode continues.
                self.tiger = if rng.gen::<f64>() < 0.5 { LEFT } else { RIGHT };
                (reward, None)
            }
            _ => panic!("tiger has 3 actions, got index {a}"),
        };
        let obs = encode_obs(heard);
        StepOutcome {
            reward,
            state: vec![0.0],
            momentary: obs.clone(),
            obs,
            done: false,
        }
    }

    fn update_belief(&self, belief: &Belief, tr: &Transition) -> Result<Belief, FilterError> {
        let weights = match belief {
            Belief::Categorical(w) => w,
            _ => unreachable!("tiger beliefs are categorical"),
        };
        let a = tr.action.index();
        if a != LISTEN {
            // Tiger resampled from the uniform prior.
            return Ok(Belief::uniform(2));
        }
        let w = categorical_update(weights, &self.grid, |phi| self.likelihood(phi, a, tr.obs))?;
        Ok(Belief::Categorical(w))
    }

    fn clone_box(&self) -> Box<dyn BeliefEnv> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{derive_stream, sample_latent, stream};

    fn env() -> TigerEnv {
        TigerEnv::new(0.85, 0.95, 100)
    }

    #[test]
    fn opening_the_tiger_door_costs_100() {
        let mut e = env();
        let mut rng = derive_stream(0, stream::ROLLOUT, 0, 0);
        e.reset(&[LEFT], &mut rng);
        let out = e.step(&Action::Discrete(OPEN_LEFT), &mut rng);
        assert_eq!(out.reward, -100.0);
    }

    #[test]
    fn opening_the_other_door_pays_10() {
        let mut e = env();
        let mut rng = derive_stream(0, stream::ROLLOUT, 0, 0);
        e.reset(&[LEFT], &mut rng);
        let out = e.step(&Action::Discrete(OPEN_RIGHT), &mut rng);
        assert_eq!(out.reward, 10.0);
    }

    #[test]
    fn listen_is_correct_at_the_configured_accuracy() {
        let mut e = env();
        let mut rng = derive_stream(42, stream::ROLLOUT, 0, 0);
        e.reset(&[LEFT], &mut rng);
        let n = 100_000;
        let mut hits = 0usize;
        for _ in 0..n {
            let out = e.step(&Action::Discrete(LISTEN), &mut rng);
            assert_eq!(out.reward, -1.0);
            if decode_obs(&out.obs) == Some(LEFT) {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.85).abs() < 0.01, "hear-left frequency {freq}");
    }

    #[test]
    fn likelihood_values_match_the_observation_model() {
        let e = env();
        let hear_left = encode_obs(Some(LEFT));
        assert_eq!(e.likelihood(&[LEFT], LISTEN, &hear_left), 0.85);
        assert!((e.likelihood(&[RIGHT], LISTEN, &hear_left) - 0.15).abs() < 1e-15);
        let none = encode_obs(None);
        assert_eq!(e.likelihood(&[LEFT], OPEN_LEFT, &none), 1.0);
        assert_eq!(e.likelihood(&[RIGHT], OPEN_LEFT, &none), 1.0);
    }

    #[test]
    fn listen_likelihood_sums_to_one_over_observations() {
        let e = env();
        for phi in [[LEFT], [RIGHT]] {
            let total: f64 = [Some(LEFT), Some(RIGHT)]
                .into_iter()
                .map(|o| e.likelihood(&phi, LISTEN, &encode_obs(o)))
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn opening_resets_the_belief_to_uniform() {
        let e = env();
        let confident = Belief::Categorical(vec![0.99, 0.01]);
        let state = [0.0];
        let obs = encode_obs(None);
        let action = Action::Discrete(OPEN_RIGHT);
        let tr = Transition {
            state: &state,
            action: &action,
            next_state: &state,
            obs: &obs,
        };
        let after = e.update_belief(&confident, &tr).unwrap();
        assert_eq!(after, Belief::uniform(2));
    }

    #[test]
    fn rewards_stay_in_the_declared_set() {
        let mut e = env();
        let mut rng = derive_stream(17, stream::ROLLOUT, 0, 0);
        e.reset(&[RIGHT], &mut rng);
        for t in 0..3000 {
            let out = e.step(&Action::Discrete(t % 3), &mut rng);
            assert!([-1.0, 10.0, -100.0].contains(&out.reward));
        }
    }

    #[test]
    fn latent_prior_samples_both_sides() {
        let e = env();
        let mut rng = derive_stream(5, stream::ROLLOUT, 0, 0);
        let mut left = 0;
        for _ in 0..1000 {
            let phi = sample_latent(e.spec(), &mut rng);
            if phi[0] == LEFT {
                left += 1;
            }
        }
        assert!((400..600).contains(&left), "left count {left}");
    }
}
