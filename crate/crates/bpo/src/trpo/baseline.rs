//! Value-baseline regression. The network learns standardized targets
//! (statistics refreshed from each batch) under minibatch Adam; raw-scale
//! predictions go through the stored statistics. A fit that fails to reduce
//! the raw-scale training MSE is rolled back.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::net::ValueNet;

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitReport {
    pub pre_mse: f64,
    pub post_mse: f64,
    pub reverted: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub epochs: usize,
    pub lr: f64,
    pub minibatch: usize,
}

fn mse(value: &ValueNet, inputs: &[(&[f64], &[f64])], targets: &[f64]) -> f64 {
    let total: f64 = inputs
        .par_iter()
        .zip(targets.par_iter())
        .map(|(&(s, b), &y)| (value.predict(s, b) - y).powi(2))
        .sum();
    total / targets.len() as f64
}

/// Regress the value network onto `targets` for `cfg.epochs` full passes of
/// shuffled minibatches. Zero epochs or a non-positive learning rate is a
/// no-op. Guarantees `post_mse <= pre_mse` on the training batch by
/// reverting a worsening fit.
pub fn fit_baseline(
    value: &mut ValueNet,
    adam: &mut AdamState,
    inputs: &[(&[f64], &[f64])],
    targets: &[f64],
    cfg: FitConfig,
    rng: &mut ChaCha8Rng,
) -> FitReport {
    let FitConfig { epochs, lr, minibatch } = cfg;
    assert_eq!(inputs.len(), targets.len());
    if epochs == 0 || lr <= 0.0 || targets.is_empty() {
        let current = if targets.is_empty() {
            0.0
        } else {
            mse(value, inputs, targets)
        };
        return FitReport { pre_mse: current, post_mse: current, reverted: false };
    }

    let pre_mse = mse(value, inputs, targets);

    let mut snapshot_params = Vec::with_capacity(value.net.param_count());
    value.net.write_flat(&mut snapshot_params);
    let snapshot_stats = (value.target_mean, value.target_std);
    let snapshot_adam = adam.clone();

    // Standardize against this batch; constant targets keep unit scale.
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let std = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    value.target_mean = mean;
    value.target_std = if std > 1e-8 { std } else { 1.0 };
    let normalized: Vec<f64> = targets
        .iter()
        .map(|y| (y - value.target_mean) / value.target_std)
        .collect();

    let n_params = value.net.param_count();
    let mut params = snapshot_params.clone();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let minibatch = minibatch.max(1);

    for _ in 0..epochs {
        // Fisher-Yates shuffle on the dedicated stream.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for mb in order.chunks(minibatch) {
            let mut grad = vec![0.0; n_params];
            for &i in mb {
                let (s, b) = inputs[i];
                let trace = value.net.forward_trace(s, b);
                let residual = trace.output()[0] - normalized[i];
                value.net.backward(&trace, &[residual], &mut grad);
            }
            let scale = 1.0 / mb.len() as f64;
            for g in &mut grad {
                *g *= scale;
            }
            adam.step(&mut params, &grad, lr);
            value.net.read_flat(&params);
        }
    }

    let post_mse = mse(value, inputs, targets);
    if post_mse > pre_mse {
        value.net.read_flat(&snapshot_params);
        value.target_mean = snapshot_stats.0;
        value.target_std = snapshot_stats.1;
        *adam = snapshot_adam;
        return FitReport { pre_mse, post_mse: pre_mse, reverted: true };
    }
    FitReport { pre_mse, post_mse, reverted: false }
}
