//! Property suites over the filters, distributions, and parameter
//! flattening.

use approx::assert_relative_eq;
use proptest::prelude::*;

use bpo::bamdp::{derive_stream, stream, LatentGrid, LatentPrior};
use bpo::belief::Belief;
use bpo::envs::{BeliefEnv, ChainCoupling, ChainEnv, TigerEnv};
use bpo::filters::{belief_entropy, categorical_update};
use bpo::net::dist::{self, DistParams};
use bpo::net::{NetConfig, PolicyHead, PolicyNet};

fn normalized(weights: Vec<f64>) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    weights.iter().map(|w| w / sum).collect()
}

proptest! {
    /// Posterior weights are nonnegative and sum to one within 1e-9 for any
    /// positive prior and any nonnegative likelihood with positive mass.
    #[test]
    fn categorical_update_normalizes(
        raw_prior in proptest::collection::vec(1e-6f64..1.0, 2..24),
        raw_lik in proptest::collection::vec(0.0f64..1.0, 2..24),
    ) {
        let n = raw_prior.len().min(raw_lik.len());
        let prior = normalized(raw_prior[..n].to_vec());
        let mut lik = raw_lik[..n].to_vec();
        // Guarantee positive total mass.
        lik[0] += 1e-3;
        let grid = LatentGrid::new(&[LatentPrior::Uniform { low: 0.0, high: 1.0 }], n).unwrap();
        let post = categorical_update(&prior, &grid, |phi| {
            let idx = (phi[0] * n as f64) as usize;
            lik[idx.min(n - 1)]
        }).unwrap();
        let sum: f64 = post.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(post.iter().all(|&w| w >= 0.0));
        Belief::Categorical(post).validate().unwrap();
    }

    /// Iterated single-evidence updates equal the one-shot posterior from
    /// the product of likelihoods.
    #[test]
    fn sequential_updates_match_batch_posterior(
        seq in proptest::collection::vec(0usize..2, 1..12),
        phi_index in 0usize..3,
    ) {
        // Tiger listen evidence: observation 0 = hear-left, 1 = hear-right.
        let env = TigerEnv::new(0.85, 0.95, 10);
        let grid = env.grid().unwrap();
        let priors = [vec![0.5, 0.5], vec![0.9, 0.1], vec![0.25, 0.75]];
        let prior = priors[phi_index].clone();

        let obs_features = |o: usize| -> Vec<f64> {
            if o == 0 { vec![1.0, 0.0, 0.0] } else { vec![0.0, 1.0, 0.0] }
        };

        let mut sequential = prior.clone();
        for &o in &seq {
            sequential = categorical_update(&sequential, grid, |phi| {
                env.likelihood(phi, 0, &obs_features(o))
            }).unwrap();
        }

        let batch = categorical_update(&prior, grid, |phi| {
            seq.iter().map(|&o| env.likelihood(phi, 0, &obs_features(o))).product()
        }).unwrap();

        for (s, b) in sequential.iter().zip(&batch) {
            prop_assert!((s - b).abs() < 1e-9, "sequential {s} vs batch {b}");
        }
    }

    /// Same equivalence on Chain transition evidence.
    #[test]
    fn chain_sequential_updates_match_batch_posterior(
        actions in proptest::collection::vec(0usize..2, 1..10),
        slips in proptest::collection::vec(0usize..2, 1..10),
    ) {
        let env = ChainEnv::new(ChainCoupling::Tied, 8, 1.0, 10);
        let grid = env.grid().unwrap();
        let n = grid.len();
        let prior = vec![1.0 / n as f64; n];

        // Build an evidence sequence by simulating the deterministic
        // transition table with chosen slip outcomes.
        let mut state = 0usize;
        let mut evidence = Vec::new();
        for (i, (&a, &s)) in actions.iter().zip(&slips).enumerate() {
            let _ = i;
            let executed = if s == 1 { 1 - a } else { a };
            let next = match executed {
                0 => (state + 1).min(4),
                _ => 0,
            };
            evidence.push((state, a, next));
            state = next;
        }

        let mut sequential = prior.clone();
        for &(s, a, next) in &evidence {
            sequential = categorical_update(&sequential, grid, |phi| {
                env.likelihood(phi, s, a, next)
            }).unwrap();
        }
        let batch = categorical_update(&prior, grid, |phi| {
            evidence.iter().map(|&(s, a, next)| env.likelihood(phi, s, a, next)).product()
        }).unwrap();
        for (a, b) in sequential.iter().zip(&batch) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    /// Listening can only reduce entropy in expectation over observations.
    #[test]
    fn tiger_listen_reduces_expected_entropy(p in 0.0f64..=1.0) {
        let env = TigerEnv::new(0.85, 0.95, 10);
        let grid = env.grid().unwrap();
        let belief = vec![p, 1.0 - p];
        let prior_entropy = belief_entropy(&Belief::Categorical(belief.clone()));

        let mut expected = 0.0;
        for (obs, features) in [(0, vec![1.0, 0.0, 0.0]), (1, vec![0.0, 1.0, 0.0])] {
            // Marginal probability of the observation under the belief.
            let acc = 0.85;
            let p_obs = if obs == 0 {
                acc * p + (1.0 - acc) * (1.0 - p)
            } else {
                (1.0 - acc) * p + acc * (1.0 - p)
            };
            if p_obs == 0.0 {
                continue;
            }
            let post = categorical_update(&belief, grid, |phi| {
                env.likelihood(phi, 0, &features)
            }).unwrap();
            expected += p_obs * belief_entropy(&Belief::Categorical(post));
        }
        prop_assert!(expected <= prior_entropy + 1e-12,
            "expected entropy {expected} above prior {prior_entropy}");
    }

    /// KL is nonnegative and vanishes only at equal parameters.
    #[test]
    fn categorical_kl_nonnegative(
        a in proptest::collection::vec(-4.0f64..4.0, 3),
        b in proptest::collection::vec(-4.0f64..4.0, 3),
    ) {
        let pa = DistParams::Categorical { logits: a };
        let pb = DistParams::Categorical { logits: b };
        let kl = dist::kl(&pa, &pb);
        prop_assert!(kl >= -1e-12);
        prop_assert!(dist::kl(&pa, &pa).abs() < 1e-12);
    }

    #[test]
    fn gaussian_kl_nonnegative(
        m1 in -3.0f64..3.0, s1 in -1.0f64..1.0,
        m2 in -3.0f64..3.0, s2 in -1.0f64..1.0,
    ) {
        let a = DistParams::Gaussian { mean: vec![m1], log_std: vec![s1] };
        let b = DistParams::Gaussian { mean: vec![m2], log_std: vec![s2] };
        let kl = dist::kl(&a, &b);
        prop_assert!(kl >= -1e-12);
        let same = dist::kl(&a, &a);
        prop_assert!(same.abs() < 1e-12);
        // Zero KL implies equal parameters (contrapositive check).
        if (m1 - m2).abs() > 1e-6 || (s1 - s2).abs() > 1e-6 {
            prop_assert!(kl > 0.0);
        }
    }

    /// Flattening the policy parameters and restoring them is the identity.
    #[test]
    fn parameter_flattening_round_trips(seed in 0u64..1000) {
        let config = NetConfig { state_dim: 2, belief_dim: 3, hidden: 4, encoders: true, out_dim: 2 };
        let mut rng = derive_stream(seed, stream::INIT, 0, 0);
        let policy = PolicyNet::init(config, PolicyHead::Gaussian, &mut rng);
        let flat = policy.flatten();
        let mut copy = PolicyNet::init(config, PolicyHead::Gaussian, &mut rng);
        copy.set_from_flat(&flat);
        prop_assert_eq!(&copy.flatten(), &flat);
        prop_assert_eq!(copy, policy);
    }
}

/// EKF posterior matches the product-of-Gaussians closed form at machine
/// precision on scalar cases (dense grid of parameters rather than random).
#[test]
fn ekf_matches_gaussian_product_closed_form() {
    use bpo::filters::ekf_update;
    for &mu in &[-3.0, 0.0, 2.0] {
        for &var in &[0.1, 1.0, 2.25] {
            for &obs in &[-1.0, 0.5, 4.0] {
                for &v_obs in &[0.05, 0.5, 3.0] {
                    let post = ekf_update(
                        &[mu],
                        &[var],
                        &[0.0],
                        &[obs],
                        |m, _| m.to_vec(),
                        |_| vec![v_obs],
                    )
                    .unwrap();
                    let (m, v) = match post {
                        Belief::Gaussian { mean, var } => (mean[0], var[0]),
                        _ => unreachable!(),
                    };
                    // Kalman-gain form of the same posterior.
                    let k = var / (var + v_obs);
                    assert_relative_eq!(m, mu + k * (obs - mu), epsilon = 1e-12);
                    assert_relative_eq!(v, (1.0 - k) * var, epsilon = 1e-12);
                    assert!(v < var);
                }
            }
        }
    }
}

/// Entries of every categorical posterior stay within [0, 1] after long
/// evidence chains (no drift).
#[test]
fn repeated_updates_do_not_drift() {
    let env = TigerEnv::new(0.85, 0.95, 10);
    let grid = env.grid().unwrap();
    let mut belief = vec![0.5, 0.5];
    let hear_left = vec![1.0, 0.0, 0.0];
    let hear_right = vec![0.0, 1.0, 0.0];
    for i in 0..10_000 {
        let obs = if i % 3 == 0 { &hear_right } else { &hear_left };
        belief = categorical_update(&belief, grid, |phi| env.likelihood(phi, 0, obs)).unwrap();
        let sum: f64 = belief.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(belief.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }
}
