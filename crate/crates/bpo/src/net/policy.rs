//! Policy and value networks. State and belief are encoded by two
//! independent two-layer MLPs whose equal-width outputs are concatenated and
//! fed to a two-layer trunk (the encoders can be bypassed, in which case the
//! trunk sees the raw concatenation). The value function uses its own
//! encoders of identical shape; no parameters are shared with the policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::net::dist::DistParams;
use crate::net::mlp::{init_dense, Activation, Mlp, Trace};

/// Architecture of one network (policy or value).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub state_dim: usize,
    /// Width of the belief-path input; 0 removes the belief path entirely.
    pub belief_dim: usize,
    /// Hidden width of every layer, including the encoder outputs.
    pub hidden: usize,
    /// When false the trunk consumes the raw `(state, belief)` concatenation.
    pub encoders: bool,
    pub out_dim: usize,
}

impl NetConfig {
    fn trunk_in(&self) -> usize {
        if self.encoders {
            self.hidden * if self.belief_dim > 0 { 2 } else { 1 }
        } else {
            self.state_dim + self.belief_dim
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Net {
    pub config: NetConfig,
    pub state_enc: Option<Mlp>,
    pub belief_enc: Option<Mlp>,
    pub trunk: Mlp,
}

/// Cached activations for one `(state, belief)` input.
#[derive(Debug, Clone)]
pub struct NetTrace {
    pub state: Option<Trace>,
    pub belief: Option<Trace>,
    pub trunk: Trace,
}

impl NetTrace {
    pub fn output(&self) -> &[f64] {
        self.trunk.output()
    }
}

fn encoder(in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Mlp {
    Mlp::new(vec![
        init_dense(in_dim, hidden, Activation::Tanh, 1.0, rng),
        init_dense(hidden, hidden, Activation::Tanh, 1.0, rng),
    ])
}

impl Net {
    /// Build with orthogonal hidden layers (gain 1) and the given gain on
    /// the output layer.
    pub fn init(config: NetConfig, output_gain: f64, rng: &mut impl Rng) -> Self {
        assert!(config.state_dim > 0, "state path must have positive width");
        assert!(config.hidden > 0, "hidden width must be positive");
        assert!(config.out_dim > 0, "output width must be positive");
        let (state_enc, belief_enc) = if config.encoders {
            (
                Some(encoder(config.state_dim, config.hidden, rng)),
                (config.belief_dim > 0).then(|| encoder(config.belief_dim, config.hidden, rng)),
            )
        } else {
            (None, None)
        };
        let trunk = Mlp::new(vec![
            init_dense(config.trunk_in(), config.hidden, Activation::Tanh, 1.0, rng),
            init_dense(config.hidden, config.hidden, Activation::Tanh, 1.0, rng),
            init_dense(config.hidden, config.out_dim, Activation::Linear, output_gain, rng),
        ]);
        Self { config, state_enc, belief_enc, trunk }
    }

    pub fn param_count(&self) -> usize {
        self.state_enc.as_ref().map_or(0, Mlp::param_count)
            + self.belief_enc.as_ref().map_or(0, Mlp::param_count)
            + self.trunk.param_count()
    }

    pub fn forward_trace(&self, state: &[f64], belief: &[f64]) -> NetTrace {
        assert_eq!(state.len(), self.config.state_dim, "state width mismatch");
        assert_eq!(belief.len(), self.config.belief_dim, "belief width mismatch");
        let (state_tr, belief_tr, trunk_in) = if self.config.encoders {
            let st = self.state_enc.as_ref().unwrap().forward_trace(state);
            let bt = self.belief_enc.as_ref().map(|enc| enc.forward_trace(belief));
            let mut joint = st.output().to_vec();
            if let Some(bt) = &bt {
                joint.extend_from_slice(bt.output());
            }
            (Some(st), bt, joint)
        } else {
            let mut joint = state.to_vec();
            joint.extend_from_slice(belief);
            (None, None, joint)
        };
        let trunk = self.trunk.forward_trace(&trunk_in);
        NetTrace { state: state_tr, belief: belief_tr, trunk }
    }

    /// Accumulate dL/dparams into `grads` (flat: state encoder, belief
    /// encoder, trunk) given dL/doutput.
    pub fn backward(&self, trace: &NetTrace, d_out: &[f64], grads: &mut [f64]) {
        let n_state = self.state_enc.as_ref().map_or(0, Mlp::param_count);
        let n_belief = self.belief_enc.as_ref().map_or(0, Mlp::param_count);
        let (grads_enc, grads_trunk) = grads.split_at_mut(n_state + n_belief);
        let (grads_state, grads_belief) = grads_enc.split_at_mut(n_state);
        let d_trunk_in = self.trunk.backward(&trace.trunk, d_out, grads_trunk);
        if let Some(enc) = &self.state_enc {
            let h = self.config.hidden;
            enc.backward(trace.state.as_ref().unwrap(), &d_trunk_in[..h], grads_state);
            if let Some(benc) = &self.belief_enc {
                benc.backward(trace.belief.as_ref().unwrap(), &d_trunk_in[h..], grads_belief);
            }
        }
    }

    /// Output tangent under a flat parameter tangent.
    pub fn jvp(&self, trace: &NetTrace, v: &[f64]) -> Vec<f64> {
        let n_state = self.state_enc.as_ref().map_or(0, Mlp::param_count);
        let n_belief = self.belief_enc.as_ref().map_or(0, Mlp::param_count);
        let trunk_v = &v[n_state + n_belief..];
        let trunk_in_dim = self.config.trunk_in();
        let mut u_trunk_in = vec![0.0; trunk_in_dim];
        if let Some(enc) = &self.state_enc {
            let zero_in = vec![0.0; self.config.state_dim];
            let u = enc.jvp(trace.state.as_ref().unwrap(), &zero_in, &v[..n_state]);
            u_trunk_in[..self.config.hidden].copy_from_slice(&u);
            if let Some(benc) = &self.belief_enc {
                let zero_b = vec![0.0; self.config.belief_dim];
                let ub = benc.jvp(
                    trace.belief.as_ref().unwrap(),
                    &zero_b,
                    &v[n_state..n_state + n_belief],
                );
                u_trunk_in[self.config.hidden..].copy_from_slice(&ub);
            }
        }
        self.trunk.jvp(&trace.trunk, &u_trunk_in, trunk_v)
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        if let Some(enc) = &self.state_enc {
            enc.write_flat(out);
        }
        if let Some(enc) = &self.belief_enc {
            enc.write_flat(out);
        }
        self.trunk.write_flat(out);
    }

    pub fn read_flat(&mut self, flat: &[f64]) -> usize {
        let mut pos = 0;
        if let Some(enc) = &mut self.state_enc {
            pos += enc.read_flat(&flat[pos..pos + enc.param_count()]);
        }
        if let Some(enc) = &mut self.belief_enc {
            pos += enc.read_flat(&flat[pos..pos + enc.param_count()]);
        }
        pos += self.trunk.read_flat(&flat[pos..pos + self.trunk.param_count()]);
        pos
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyHead {
    Categorical,
    Gaussian,
}

/// The stochastic policy: a network emitting logits or an action mean, plus
/// a global learnable log-std vector for continuous actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub net: Net,
    pub head: PolicyHead,
    pub log_std: Vec<f64>,
}

impl PolicyNet {
    pub fn init(config: NetConfig, head: PolicyHead, rng: &mut impl Rng) -> Self {
        // Small output gain keeps the initial policy near uniform (discrete)
        // or near zero mean (continuous).
        let net = Net::init(config, 0.01, rng);
        let log_std = match head {
            PolicyHead::Categorical => Vec::new(),
            PolicyHead::Gaussian => vec![0.0; config.out_dim],
        };
        Self { net, head, log_std }
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count() + self.log_std.len()
    }

    pub fn forward_trace(&self, state: &[f64], belief: &[f64]) -> NetTrace {
        self.net.forward_trace(state, belief)
    }

    pub fn dist(&self, trace: &NetTrace) -> DistParams {
        match self.head {
            PolicyHead::Categorical => DistParams::Categorical { logits: trace.output().to_vec() },
            PolicyHead::Gaussian => DistParams::Gaussian {
                mean: trace.output().to_vec(),
                log_std: self.log_std.clone(),
            },
        }
    }

    pub fn forward(&self, state: &[f64], belief: &[f64]) -> DistParams {
        let trace = self.forward_trace(state, belief);
        self.dist(&trace)
    }

    /// Accumulate dL/dparams given dL/d(dist params). The dist-param vector
    /// is the logits, or `[mean, log_std]` for the Gaussian head.
    pub fn backward_dist(&self, trace: &NetTrace, d_dist: &[f64], grads: &mut [f64]) {
        let out_dim = self.net.config.out_dim;
        let n_net = self.net.param_count();
        self.net.backward(trace, &d_dist[..out_dim], &mut grads[..n_net]);
        for (g, d) in grads[n_net..].iter_mut().zip(&d_dist[out_dim..]) {
            *g += d;
        }
    }

    /// Dist-param tangent under a flat parameter tangent.
    pub fn jvp_dist(&self, trace: &NetTrace, v: &[f64]) -> Vec<f64> {
        let n_net = self.net.param_count();
        let mut u = self.net.jvp(trace, &v[..n_net]);
        u.extend_from_slice(&v[n_net..]);
        u
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.net.write_flat(&mut out);
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "flat parameter length mismatch");
        let pos = self.net.read_flat(flat);
        self.log_std.copy_from_slice(&flat[pos..]);
    }
}

/// Value function over the same `(state, belief)` inputs. The network
/// regresses standardized targets; predictions are mapped back through the
/// stored target statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    pub net: Net,
    pub target_mean: f64,
    pub target_std: f64,
}

impl ValueNet {
    pub fn init(config: NetConfig, rng: &mut impl Rng) -> Self {
        assert_eq!(config.out_dim, 1, "value head is scalar");
        Self {
            net: Net::init(config, 1.0, rng),
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    pub fn predict(&self, state: &[f64], belief: &[f64]) -> f64 {
        let trace = self.net.forward_trace(state, belief);
        self.predict_from_trace(&trace)
    }

    pub fn predict_from_trace(&self, trace: &NetTrace) -> f64 {
        trace.output()[0] * self.target_std + self.target_mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bamdp::{derive_stream, stream, Action};
    use crate::net::dist::{grad_log_prob, log_prob, softmax};

    fn assert_close(analytic: f64, numeric: f64, tol: f64) {
        let scale = analytic.abs().max(numeric.abs()).max(1.0);
        assert!(
            (analytic - numeric).abs() / scale < tol,
            "analytic={analytic} numeric={numeric}"
        );
    }

    #[test]
    fn zero_weight_network_yields_uniform_categorical() {
        let config = NetConfig { state_dim: 1, belief_dim: 2, hidden: 8, encoders: true, out_dim: 3 };
        let mut rng = derive_stream(0, stream::INIT, 0, 0);
        let mut policy = PolicyNet::init(config, PolicyHead::Categorical, &mut rng);
        let zeros = vec![0.0; policy.param_count()];
        policy.set_from_flat(&zeros);
        let dist = policy.forward(&[0.4], &[0.6, 0.4]);
        if let DistParams::Categorical { logits } = dist {
            assert!(logits.iter().all(|&l| l == 0.0));
            let p = softmax(&logits);
            for pi in p {
                assert!((pi - 1.0 / 3.0).abs() < 1e-15);
            }
        } else {
            unreachable!();
        }
    }

    #[test]
    fn flatten_round_trips_exactly() {
        let config = NetConfig { state_dim: 2, belief_dim: 4, hidden: 8, encoders: true, out_dim: 2 };
        let mut rng = derive_stream(1, stream::INIT, 0, 0);
        let policy = PolicyNet::init(config, PolicyHead::Gaussian, &mut rng);
        let flat = policy.flatten();
        let mut other = PolicyNet::init(config, PolicyHead::Gaussian, &mut rng);
        other.set_from_flat(&flat);
        assert_eq!(policy, other);
        assert_eq!(flat.len(), policy.param_count());
    }

    /// Central-difference check of d log pi / d theta for every architecture
    /// used in the experiments.
    fn gradient_check(config: NetConfig, head: PolicyHead, action: Action) {
        let mut rng = derive_stream(2, stream::INIT, 7, 3);
        let mut policy = PolicyNet::init(config, head, &mut rng);
        // Randomize the output layer too; a 0.01-gain init leaves gradients
        // there too uniform to exercise the check.
        let flat: Vec<f64> = policy
            .flatten()
            .iter()
            .map(|_| rng.gen_range(-0.7..0.7))
            .collect();
        policy.set_from_flat(&flat);

        let state: Vec<f64> = (0..config.state_dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let belief: Vec<f64> = (0..config.belief_dim).map(|_| rng.gen_range(0.0..1.0)).collect();

        let trace = policy.forward_trace(&state, &belief);
        let dist = policy.dist(&trace);
        let d_dist = grad_log_prob(&dist, &action);
        let mut grads = vec![0.0; policy.param_count()];
        policy.backward_dist(&trace, &d_dist, &mut grads);

        let eps = 1e-5;
        let mut probe = policy.clone();
        for i in 0..flat.len() {
            let mut fp = flat.clone();
            fp[i] += eps;
            probe.set_from_flat(&fp);
            let lp_plus = log_prob(&probe.forward(&state, &belief), &action);
            fp[i] -= 2.0 * eps;
            probe.set_from_flat(&fp);
            let lp_minus = log_prob(&probe.forward(&state, &belief), &action);
            let numeric = (lp_plus - lp_minus) / (2.0 * eps);
            assert_close(grads[i], numeric, 1e-5);
        }
    }

    #[test]
    fn gradient_check_dual_encoder_categorical() {
        let config = NetConfig { state_dim: 1, belief_dim: 2, hidden: 6, encoders: true, out_dim: 3 };
        gradient_check(config, PolicyHead::Categorical, Action::Discrete(1));
    }

    #[test]
    fn gradient_check_bypass_categorical() {
        let config = NetConfig { state_dim: 5, belief_dim: 10, hidden: 6, encoders: false, out_dim: 2 };
        gradient_check(config, PolicyHead::Categorical, Action::Discrete(0));
    }

    #[test]
    fn gradient_check_dual_encoder_gaussian() {
        let config = NetConfig { state_dim: 2, belief_dim: 4, hidden: 6, encoders: true, out_dim: 2 };
        gradient_check(config, PolicyHead::Gaussian, Action::Continuous(vec![0.3, -0.9]));
    }

    #[test]
    fn gradient_check_single_path() {
        let config = NetConfig { state_dim: 3, belief_dim: 0, hidden: 6, encoders: true, out_dim: 3 };
        gradient_check(config, PolicyHead::Categorical, Action::Discrete(2));
    }

    #[test]
    fn value_gradient_check() {
        let config = NetConfig { state_dim: 2, belief_dim: 3, hidden: 6, encoders: true, out_dim: 1 };
        let mut rng = derive_stream(3, stream::INIT, 1, 1);
        let value = ValueNet::init(config, &mut rng);
        let state = [0.5, -0.2];
        let belief = [0.2, 0.5, 0.3];
        let trace = value.net.forward_trace(&state, &belief);
        let mut grads = vec![0.0; value.net.param_count()];
        value.net.backward(&trace, &[1.0], &mut grads);

        let mut flat = Vec::new();
        value.net.write_flat(&mut flat);
        let mut probe = value.clone();
        let eps = 1e-5;
        for i in 0..flat.len() {
            let mut fp = flat.clone();
            fp[i] += eps;
            probe.net.read_flat(&fp);
            let plus = probe.net.forward_trace(&state, &belief).output()[0];
            fp[i] -= 2.0 * eps;
            probe.net.read_flat(&fp);
            let minus = probe.net.forward_trace(&state, &belief).output()[0];
            assert_close(grads[i], (plus - minus) / (2.0 * eps), 1e-5);
        }
    }

    #[test]
    fn activations_and_outputs_stay_finite_and_bounded() {
        let config = NetConfig { state_dim: 2, belief_dim: 4, hidden: 8, encoders: true, out_dim: 2 };
        let mut rng = derive_stream(4, stream::INIT, 0, 0);
        let policy = PolicyNet::init(config, PolicyHead::Gaussian, &mut rng);
        let trace = policy.forward_trace(&[1e6, -1e6], &[1e3, 0.0, -1e3, 5.0]);
        for t in [trace.state.as_ref().unwrap(), trace.belief.as_ref().unwrap()] {
            for act in &t.acts[1..] {
                for &a in act {
                    assert!(a.is_finite());
                    assert!((-1.0..=1.0).contains(&a));
                }
            }
        }
        assert!(policy.dist(&trace).is_finite());
    }

    #[test]
    #[should_panic(expected = "state width mismatch")]
    fn width_mismatch_is_rejected() {
        let config = NetConfig { state_dim: 2, belief_dim: 2, hidden: 4, encoders: true, out_dim: 2 };
        let mut rng = derive_stream(5, stream::INIT, 0, 0);
        let policy = PolicyNet::init(config, PolicyHead::Categorical, &mut rng);
        policy.forward(&[0.0], &[0.0, 0.0]);
    }
}
