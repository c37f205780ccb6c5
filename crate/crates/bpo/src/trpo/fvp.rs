//! Batch gradient machinery: surrogate policy gradient, Fisher-vector
//! products, and full-batch KL/surrogate evaluation.
//!
//! Batch reductions are parallel over fixed-size chunks whose partial sums
//! are folded in index order, so results are bitwise identical for any
//! worker count.

use rayon::prelude::*;

use crate::net::dist::{self, DistParams};
use crate::net::{NetTrace, PolicyNet};

use super::Batch;

/// Fixed reduction chunk; independent of thread count.
const CHUNK: usize = 512;

/// Cached forward passes of the sampling-time policy over a batch.
pub struct BatchCache {
    pub traces: Vec<NetTrace>,
    pub old_dists: Vec<DistParams>,
}

pub fn build_cache(policy: &PolicyNet, batch: &Batch) -> BatchCache {
    let traces: Vec<NetTrace> = batch
        .samples
        .par_iter()
        .map(|s| policy.forward_trace(&s.state_in, &s.belief_in))
        .collect();
    let old_dists: Vec<DistParams> = traces.par_iter().map(|t| policy.dist(t)).collect();
    BatchCache { traces, old_dists }
}

/// Deterministic parallel accumulation of per-sample parameter gradients.
fn chunked_grad_sum(
    n_samples: usize,
    n_params: usize,
    per_sample: impl Fn(usize, &mut [f64]) + Sync,
) -> Vec<f64> {
    let chunks: Vec<Vec<f64>> = (0..n_samples)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut acc = vec![0.0; n_params];
            for &i in idx {
                per_sample(i, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; n_params];
    for chunk in chunks {
        for (t, c) in total.iter_mut().zip(&chunk) {
            *t += c;
        }
    }
    total
}

fn chunked_scalar_sum(n: usize, per_sample: impl Fn(usize) -> f64 + Sync) -> f64 {
    (0..n)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| idx.iter().map(|&i| per_sample(i)).sum::<f64>())
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Gradient of the surrogate objective
/// `L = mean_i exp(log pi(a_i) - log pi_old(a_i)) * A_i`
/// at the sampling-time parameters, where each ratio is 1 and the gradient
/// of sample `i` reduces to `A_i * grad log pi(a_i)`.
pub fn surrogate_gradient(
    policy: &PolicyNet,
    batch: &Batch,
    cache: &BatchCache,
    advantages: &[f64],
) -> Vec<f64> {
    let n = batch.samples.len();
    let mut g = chunked_grad_sum(n, policy.param_count(), |i, acc| {
        if advantages[i] == 0.0 {
            return;
        }
        let mut d_dist = dist::grad_log_prob(&cache.old_dists[i], &batch.samples[i].action);
        for d in &mut d_dist {
            *d *= advantages[i];
        }
        policy.backward_dist(&cache.traces[i], &d_dist, acc);
    });
    let scale = 1.0 / n as f64;
    for gi in &mut g {
        *gi *= scale;
    }
    g
}

/// Product of the batch-mean KL Hessian (at new = old) with `v`, plus
/// `damping * v`. Uses the Gauss-Newton decomposition J^T M J per sample,
/// where J is the Jacobian of the distribution parameters with respect to
/// the policy parameters and M the distribution-space Fisher metric — equal
/// to the exact KL Hessian at the expansion point because the inner KL
/// gradient vanishes there.
pub fn fisher_vector_product(
    policy: &PolicyNet,
    batch: &Batch,
    cache: &BatchCache,
    v: &[f64],
    damping: f64,
) -> Vec<f64> {
    let n = batch.samples.len();
    let mut hv = chunked_grad_sum(n, policy.param_count(), |i, acc| {
        let u = policy.jvp_dist(&cache.traces[i], v);
        let w = dist::fisher_product(&cache.old_dists[i], &u);
        policy.backward_dist(&cache.traces[i], &w, acc);
    });
    let scale = 1.0 / n as f64;
    for (h, &vi) in hv.iter_mut().zip(v) {
        *h = *h * scale + damping * vi;
    }
    hv
}

/// Batch-mean KL(old || new) and surrogate value of the current `policy`
/// parameters against the cached sampling-time distributions.
pub fn evaluate_policy(
    policy: &PolicyNet,
    batch: &Batch,
    cache: &BatchCache,
    advantages: &[f64],
) -> (f64, f64) {
    let n = batch.samples.len();
    let sums: Vec<(f64, f64)> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|idx| {
            let mut kl_sum = 0.0;
            let mut surr_sum = 0.0;
            for &i in idx {
                let sample = &batch.samples[i];
                let new = policy.forward(&sample.state_in, &sample.belief_in);
                kl_sum += dist::kl(&cache.old_dists[i], &new);
                let ratio = (dist::log_prob(&new, &sample.action) - sample.log_prob_old).exp();
                surr_sum += ratio * advantages[i];
            }
            (kl_sum, surr_sum)
        })
        .collect();
    let (kl, surr) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), &(k, s)| (a + k, b + s));
    (kl / n as f64, surr / n as f64)
}

/// Mean policy entropy at the sampling-time parameters.
pub fn mean_entropy(cache: &BatchCache) -> f64 {
    let n = cache.old_dists.len();
    chunked_scalar_sum(n, |i| dist::entropy(&cache.old_dists[i])) / n as f64
}

/// Largest `beta = ratio^k`, `k < max_steps`, whose evaluation satisfies
/// `kl <= kl_limit` and strictly positive improvement. Returns
/// `(beta, exponent, kl, improvement)` of the accepted candidate.
pub fn backtracking_line_search(
    eval: impl Fn(f64) -> (f64, f64),
    kl_limit: f64,
    ratio: f64,
    max_steps: usize,
) -> Option<(f64, usize, f64, f64)> {
    let mut beta = 1.0;
    for exponent in 0..max_steps {
        let (kl, improvement) = eval(beta);
        if kl.is_finite() && improvement.is_finite() && kl <= kl_limit && improvement > 0.0 {
            return Some((beta, exponent, kl, improvement));
        }
        beta *= ratio;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{derive_stream, stream, Action};
    use crate::net::{NetConfig, PolicyHead};
    use crate::trpo::Sample;

    fn tiny_batch(head: PolicyHead) -> (PolicyNet, Batch) {
        let out_dim = 3;
        let config = NetConfig { state_dim: 2, belief_dim: 3, hidden: 5, encoders: true, out_dim };
        let mut rng = derive_stream(0, stream::INIT, 2, 2);
        let mut policy = PolicyNet::init(config, head, &mut rng);
        let flat: Vec<f64> = policy
            .flatten()
            .iter()
            .map(|_| rand::Rng::gen_range(&mut rng, -0.5..0.5))
            .collect();
        policy.set_from_flat(&flat);

        let mut samples = Vec::new();
        for i in 0..6 {
            let state_in = vec![0.1 * i as f64, -0.2];
            let belief_in = vec![0.3, 0.5, 0.2];
            let dist = policy.forward(&state_in, &belief_in);
            let action = match head {
                PolicyHead::Categorical => Action::Discrete(i % out_dim),
                PolicyHead::Gaussian => {
                    Action::Continuous(vec![0.1 * i as f64, -0.3, 0.2])
                }
            };
            let log_prob_old = dist::log_prob(&dist, &action);
            samples.push(Sample { state_in, belief_in, action, log_prob_old, reward: 0.0 });
        }
        let bounds = vec![(0, 3), (3, 6)];
        (policy, Batch { samples, bounds })
    }

    #[test]
    fn zero_advantages_give_zero_gradient() {
        let (policy, batch) = tiny_batch(PolicyHead::Categorical);
        let cache = build_cache(&policy, &batch);
        let g = surrogate_gradient(&policy, &batch, &cache, &vec![0.0; 6]);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_sample_gradient_is_advantage_times_score() {
        let (policy, batch) = tiny_batch(PolicyHead::Categorical);
        let one = Batch {
            samples: vec![batch.samples[0].clone()],
            bounds: vec![(0, 1)],
        };
        let cache = build_cache(&policy, &one);
        let g = surrogate_gradient(&policy, &one, &cache, &[2.5]);
        // Direct score computation.
        let d_dist = dist::grad_log_prob(&cache.old_dists[0], &one.samples[0].action);
        let mut expected = vec![0.0; policy.param_count()];
        policy.backward_dist(&cache.traces[0], &d_dist, &mut expected);
        for (gi, ei) in g.iter().zip(&expected) {
            assert!((gi - 2.5 * ei).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        for head in [PolicyHead::Categorical, PolicyHead::Gaussian] {
            let (policy, batch) = tiny_batch(head);
            let cache = build_cache(&policy, &batch);
            let advantages: Vec<f64> = (0..6).map(|i| (i as f64 - 2.5) * 0.8).collect();
            let g = surrogate_gradient(&policy, &batch, &cache, &advantages);

            let flat = policy.flatten();
            let mut probe = policy.clone();
            let eps = 1e-5;
            for i in (0..flat.len()).step_by(7) {
                let mut fp = flat.clone();
                fp[i] += eps;
                probe.set_from_flat(&fp);
                let (_, s_plus) = evaluate_policy(&probe, &batch, &cache, &advantages);
                fp[i] -= 2.0 * eps;
                probe.set_from_flat(&fp);
                let (_, s_minus) = evaluate_policy(&probe, &batch, &cache, &advantages);
                let numeric = (s_plus - s_minus) / (2.0 * eps);
                let scale = g[i].abs().max(numeric.abs()).max(1.0);
                assert!(
                    (g[i] - numeric).abs() / scale < 1e-5,
                    "param {i}: analytic {} vs numeric {numeric}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn fvp_of_zero_is_zero() {
        let (policy, batch) = tiny_batch(PolicyHead::Categorical);
        let cache = build_cache(&policy, &batch);
        let v = vec![0.0; policy.param_count()];
        let hv = fisher_vector_product(&policy, &batch, &cache, &v, 0.37);
        assert!(hv.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fvp_is_symmetric_and_psd() {
        for head in [PolicyHead::Categorical, PolicyHead::Gaussian] {
            let (policy, batch) = tiny_batch(head);
            let cache = build_cache(&policy, &batch);
            let n = policy.param_count();
            let mut rng = derive_stream(1, stream::INIT, 0, 0);
            for _ in 0..4 {
                let u: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
                let hu = fisher_vector_product(&policy, &batch, &cache, &u, 0.0);
                let hv = fisher_vector_product(&policy, &batch, &cache, &v, 0.0);
                let uhv = super::super::cg::dot(&u, &hv);
                let vhu = super::super::cg::dot(&v, &hu);
                let scale = uhv.abs().max(vhu.abs()).max(1.0);
                assert!((uhv - vhu).abs() / scale < 1e-8, "asymmetry {uhv} vs {vhu}");
                let uhu = super::super::cg::dot(&u, &hu);
                assert!(uhu >= -1e-10, "negative curvature {uhu}");
            }
        }
    }

    #[test]
    fn fvp_matches_finite_difference_kl_hessian() {
        for head in [PolicyHead::Categorical, PolicyHead::Gaussian] {
            let (policy, batch) = tiny_batch(head);
            let cache = build_cache(&policy, &batch);
            let n = policy.param_count();
            let mut rng = derive_stream(2, stream::INIT, 0, 0);
            let v: Vec<f64> = (0..n).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
            let hv = fisher_vector_product(&policy, &batch, &cache, &v, 0.0);

            // Central difference of the KL gradient along v.
            let flat = policy.flatten();
            let eps = 1e-5;
            let kl_grad = |params: &[f64]| -> Vec<f64> {
                let mut probe = policy.clone();
                probe.set_from_flat(params);
                let mut g = vec![0.0; n];
                for (i, sample) in batch.samples.iter().enumerate() {
                    let trace = probe.forward_trace(&sample.state_in, &sample.belief_in);
                    let new = probe.dist(&trace);
                    let d = dist::grad_kl_new(&cache.old_dists[i], &new);
                    probe.backward_dist(&trace, &d, &mut g);
                }
                for gi in &mut g {
                    *gi /= batch.samples.len() as f64;
                }
                g
            };
            let plus: Vec<f64> = flat.iter().zip(&v).map(|(p, t)| p + eps * t).collect();
            let minus: Vec<f64> = flat.iter().zip(&v).map(|(p, t)| p - eps * t).collect();
            let gp = kl_grad(&plus);
            let gm = kl_grad(&minus);
            for i in 0..n {
                let numeric = (gp[i] - gm[i]) / (2.0 * eps);
                let scale = hv[i].abs().max(numeric.abs()).max(1.0);
                assert!(
                    (hv[i] - numeric).abs() / scale < 1e-4,
                    "param {i}: fvp {} vs fd {numeric}",
                    hv[i]
                );
            }
        }
    }

    #[test]
    fn full_step_accepted_immediately_when_feasible() {
        let eval = |beta: f64| (0.005 * beta * beta, beta);
        let out = backtracking_line_search(eval, 0.01, 0.8, 15).unwrap();
        assert_eq!(out.1, 0);
        assert_eq!(out.0, 1.0);
    }

    #[test]
    fn infeasible_search_returns_none() {
        let eval = |_beta: f64| (1.0, -1.0);
        assert!(backtracking_line_search(eval, 0.01, 0.8, 15).is_none());
    }

    #[test]
    fn constructed_half_step_is_accepted_at_the_first_backtrack() {
        // Quadratic KL model 2 * limit * beta^2: the full step violates the
        // bound, exactly the half step satisfies it with ratio 0.5.
        let limit = 0.01;
        let eval = |beta: f64| (2.0 * limit * beta * beta, beta);
        let out = backtracking_line_search(eval, limit, 0.5, 15).unwrap();
        assert_eq!(out.1, 1);
        assert_eq!(out.0, 0.5);
    }
}
