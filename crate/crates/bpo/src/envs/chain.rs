//! Chain: five states in a line. Action A advances toward s5 (staying at s5
//! pays 10), action B resets to s1 for 2. The executed action flips to the
//! opposite one with a latent slip probability, sampled uniformly from
//! [0, 1] per episode — shared by both actions (tied) or independent per
//! action (semitied).

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bamdp::{Action, ActionSpace, BamdpSpec, LatentGrid, LatentPrior};
use crate::belief::Belief;
use crate::error::FilterError;
use crate::filters::categorical_update;

use super::{BeliefEnv, ResetOutcome, StepOutcome, Transition};

pub const FORWARD: usize = 0; // action A
pub const RESET: usize = 1; // action B

pub const N_STATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainCoupling {
    /// One slip probability shared by both actions.
    Tied,
    /// Independent slip probabilities, one per action.
    Semitied,
}

#[derive(Debug, Clone)]
pub struct ChainEnv {
    spec: BamdpSpec,
    grid: LatentGrid,
    coupling: ChainCoupling,
    slip: Vec<f64>,
    state: usize,
}

/// Deterministic effect of an *executed* action.
fn executed_transition(state: usize, executed: usize) -> (usize, f64) {
    match executed {
        FORWARD => {
            if state + 1 < N_STATES {
                (state + 1, 0.0)
            } else {
                (N_STATES - 1, 10.0)
            }
        }
        RESET => (0, 2.0),
        _ => panic!("chain has 2 actions, got index {executed}"),
    }
}

fn one_hot(state: usize) -> Vec<f64> {
    let mut v = vec![0.0; N_STATES];
    v[state] = 1.0;
    v
}

fn decode_state(features: &[f64]) -> usize {
    features
        .iter()
        .position(|&x| x == 1.0)
        .expect("chain state features are one-hot")
}

impl ChainEnv {
    pub fn new(coupling: ChainCoupling, bins_per_dim: usize, discount: f64, horizon: usize) -> Self {
        let dims = match coupling {
            ChainCoupling::Tied => 1,
            ChainCoupling::Semitied => 2,
        };
        let prior = vec![LatentPrior::Uniform { low: 0.0, high: 1.0 }; dims];
        let grid = LatentGrid::new(&prior, bins_per_dim).unwrap();
        let spec = BamdpSpec {
            state_dim: N_STATES,
            action_space: ActionSpace::Discrete(2),
            latent_prior: prior,
            discount,
            horizon,
        };
        spec.validate().unwrap();
        Self {
            spec,
            grid,
            coupling,
            slip: vec![0.0; dims],
            state: 0,
        }
    }

    fn slip_for(phi: &[f64], coupling: ChainCoupling, intended: usize) -> f64 {
        match coupling {
            ChainCoupling::Tied => phi[0],
            ChainCoupling::Semitied => phi[intended],
        }
    }

    /// Likelihood of landing in `next` from `state` under intended action,
    /// for the slip vector `phi`. The intended and opposite outcomes are
    /// distinct for every state, so the transition identifies the executed
    /// action exactly.
    pub fn likelihood(
        &self,
        phi: &[f64],
        state: usize,
        intended: usize,
        next: usize,
    ) -> f64 {
        let slip = Self::slip_for(phi, self.coupling, intended);
        let (intended_next, _) = executed_transition(state, intended);
        let (opposite_next, _) = executed_transition(state, 1 - intended);
        if next == intended_next {
            1.0 - slip
        } else if next == opposite_next {
            slip
        } else {
            0.0
        }
    }
}

impl BeliefEnv for ChainEnv {
    fn spec(&self) -> &BamdpSpec {
        &self.spec
    }

    fn grid(&self) -> Option<&LatentGrid> {
        Some(&self.grid)
    }

    fn state_dim(&self) -> usize {
        N_STATES
    }

    fn momentary_dim(&self) -> usize {
        N_STATES
    }

    fn initial_belief(&self) -> Belief {
        Belief::uniform(self.grid.len())
    }

    fn reset(&mut self, latent: &[f64], _rng: &mut dyn RngCore) -> ResetOutcome {
        self.slip = latent.to_vec();
        self.state = 0;
        let features = one_hot(self.state);
        ResetOutcome {
            state: features.clone(),
            momentary: features,
        }
    }

    fn step(&mut self, action: &Action, rng: &mut dyn RngCore) -> StepOutcome {
        let intended = action.index();
        let slip = Self::slip_for(&self.slip, self.coupling, intended);
        let executed = if rng.gen::<f64>() < slip {
            1 - intended
        } else {
            intended
        };
        let (next, reward) = executed_transition(self.state, executed);
        self.state = next;
        let features = one_hot(next);
        StepOutcome {
            reward,
            state: features.clone(),
            momentary: features,
            obs: Vec::new(),
            done: false,
        }
    }

    fn update_belief(&self, belief: &Belief, tr: &Transition) -> Result<Belief, FilterError> {
        let weights = match belief {
            Belief::Categorical(w) => w,
            _ => unreachable!("chain beliefs are categorical"),
        };
        let state = decode_state(tr.state);
        let next = decode_state(tr.next_state);
        let intended = tr.action.index();
        let w = categorical_update(weights, &self.grid, |phi| {
            self.likelihood(phi, state, intended, next)
        })?;
        Ok(Belief::Categorical(w))
    }

    fn clone_box(&self) -> Box<dyn BeliefEnv> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{derive_stream, stream};

    #[test]
    fn forward_at_the_end_stays_and_pays_10() {
        assert_eq!(executed_transition(4, FORWARD), (4, 10.0));
    }

    #[test]
    fn reset_from_anywhere_pays_2() {
        for s in 0..N_STATES {
            assert_eq!(executed_transition(s, RESET), (0, 2.0));
        }
    }

    #[test]
    fn zero_slip_makes_transitions_deterministic() {
        let mut e = ChainEnv::new(ChainCoupling::Tied, 10, 1.0, 100);
        let mut rng = derive_stream(0, stream::ROLLOUT, 0, 0);
        e.reset(&[0.0], &mut rng);
        let out = e.step(&Action::Discrete(FORWARD), &mut rng);
        assert_eq!(out.reward, 0.0);
        assert_eq!(decode_state(&out.state), 1);
        let out = e.step(&Action::Discrete(FORWARD), &mut rng);
        assert_eq!(decode_state(&out.state), 2);
    }

    #[test]
    fn likelihood_matches_the_transition_table() {
        let e = ChainEnv::new(ChainCoupling::Tied, 10, 1.0, 100);
        // Intending A at s1: s2 is the intended outcome, s1 the slip outcome.
        assert_eq!(e.likelihood(&[0.2], 0, FORWARD, 1), 0.8);
        assert_eq!(e.likelihood(&[0.2], 0, FORWARD, 0), 0.2);
        assert_eq!(e.likelihood(&[0.0], 0, FORWARD, 1), 1.0);
        assert_eq!(e.likelihood(&[0.0], 0, FORWARD, 0), 0.0);
    }

    #[test]
    fn semitied_likelihood_uses_the_intended_actions_slip() {
        let e = ChainEnv::new(ChainCoupling::Semitied, 10, 1.0, 100);
        let phi = [0.1, 0.7];
        assert!((e.likelihood(&phi, 2, FORWARD, 3) - 0.9).abs() < 1e-15);
        assert!((e.likelihood(&phi, 2, RESET, 0) - 0.3).abs() < 1e-15);
        assert_eq!(e.likelihood(&phi, 2, RESET, 3), 0.7);
    }

    #[test]
    fn intended_and_opposite_outcomes_are_distinct_everywhere() {
        for s in 0..N_STATES {
            let (fwd, _) = executed_transition(s, FORWARD);
            let (rst, _) = executed_transition(s, RESET);
            assert_ne!(fwd, rst, "outcomes coincide at state {s}");
        }
    }

    #[test]
    fn likelihood_sums_to_one_over_next_states() {
        let e = ChainEnv::new(ChainCoupling::Tied, 10, 1.0, 100);
        for cell in 0..e.grid.len() {
            let phi = e.grid.center(cell).to_vec();
            for s in 0..N_STATES {
                for a in [FORWARD, RESET] {
                    let total: f64 = (0..N_STATES).map(|n| e.likelihood(&phi, s, a, n)).sum();
                    assert!((total - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empirical_slip_frequency_matches_phi() {
        let mut e = ChainEnv::new(ChainCoupling::Tied, 10, 1.0, 100);
        let mut rng = derive_stream(9, stream::ROLLOUT, 0, 0);
        let phi = 0.3;
        let n = 100_000;
        let mut slips = 0usize;
        for _ in 0..n {
            e.reset(&[phi], &mut rng);
            // From s1, intending A: landing back at s1 means the slip fired.
            let out = e.step(&Action::Discrete(FORWARD), &mut rng);
            if decode_state(&out.state) == 0 {
                slips += 1;
            }
        }
        let freq = slips as f64 / n as f64;
        assert!((freq - phi).abs() < 0.01, "slip frequency {freq}");
    }

    #[test]
    fn rewards_stay_in_the_declared_set() {
        let mut e = ChainEnv::new(ChainCoupling::Tied, 10, 1.0, 100);
        let mut rng = derive_stream(13, stream::ROLLOUT, 0, 0);
        e.reset(&[0.4], &mut rng);
        for t in 0..1000 {
            let a = Action::Discrete(t % 2);
            let out = e.step(&a, &mut rng);
            assert!([0.0, 2.0, 10.0].contains(&out.reward));
            assert!(decode_state(&out.state) < N_STATES);
        }
    }
}
