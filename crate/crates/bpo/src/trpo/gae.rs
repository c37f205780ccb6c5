//! Generalized advantage estimation over batches of variable-length
//! episodes.

/// Per-episode advantages and value-regression targets.
///
/// `values[i]` must hold one entry per state of episode `i` including the
/// terminal one (zero at a true horizon end), i.e. `rewards[i].len() + 1`
/// entries. Within an episode:
///
/// `delta_t = r_t + gamma * V_{t+1} - V_t`
/// `A_t = sum_{l >= 0} (gamma * lambda)^l delta_{t+l}`
///
/// Targets are `A_t + V_t`. Advantages are returned raw; see
/// [`normalize_advantages`] for the per-batch standardization applied before
/// the gradient computation.
pub fn compute_gae(
    rewards: &[&[f64]],
    values: &[&[f64]],
    gamma: f64,
    lambda: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    assert_eq!(rewards.len(), values.len());
    let mut advantages = Vec::with_capacity(rewards.len());
    let mut targets = Vec::with_capacity(rewards.len());
    for (r, v) in rewards.iter().zip(values) {
        assert_eq!(
            v.len(),
            r.len() + 1,
            "need a value per state including the terminal bootstrap"
        );
        let len = r.len();
        let mut adv = vec![0.0; len];
        let mut acc = 0.0;
        for t in (0..len).rev() {
            let delta = r[t] + gamma * v[t + 1] - v[t];
            acc = delta + gamma * lambda * acc;
            adv[t] = acc;
        }
        let tgt = adv.iter().zip(v.iter()).map(|(a, vi)| a + vi).collect();
        advantages.push(adv);
        targets.push(tgt);
    }
    (advantages, targets)
}

/// Standardize to zero mean and unit variance across the whole batch. A
/// near-zero spread leaves the centered values as-is (identical advantages
/// carry no gradient signal).
pub fn normalize_advantages(advantages: &mut [f64]) {
    if advantages.is_empty() {
        return;
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-8 {
        for a in advantages.iter_mut() {
            *a = (*a - mean) / std;
        }
    } else {
        for a in advantages.iter_mut() {
            *a -= mean;
        }
    }
}
