//! Versioned checkpoint format: named flat parameter arrays with shapes,
//! plus the architecture they instantiate. JSON serialization keeps f64
//! values bit-exact (shortest round-trip formatting).

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::net::mlp::{Activation, Dense, Mlp};
use crate::net::policy::{Net, NetConfig, PolicyHead, PolicyNet, ValueNet};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub policy_config: NetConfig,
    pub head: PolicyHead,
    pub value_config: NetConfig,
    pub value_target_mean: f64,
    pub value_target_std: f64,
    pub arrays: Vec<NamedArray>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint is missing array {0}")]
    MissingArray(String),
    #[error("array {name} has {len} values for shape {shape:?}")]
    ShapeMismatch { name: String, shape: Vec<usize>, len: usize },
}

fn push_mlp(arrays: &mut Vec<NamedArray>, prefix: &str, mlp: &Mlp) {
    for (i, layer) in mlp.layers.iter().enumerate() {
        arrays.push(NamedArray {
            name: format!("{prefix}.{i}.w"),
            shape: vec![layer.out_dim, layer.in_dim],
            data: layer.w.clone(),
        });
        arrays.push(NamedArray {
            name: format!("{prefix}.{i}.b"),
            shape: vec![layer.out_dim],
            data: layer.b.clone(),
        });
    }
}

fn push_net(arrays: &mut Vec<NamedArray>, prefix: &str, net: &Net) {
    if let Some(enc) = &net.state_enc {
        push_mlp(arrays, &format!("{prefix}.state_enc"), enc);
    }
    if let Some(enc) = &net.belief_enc {
        push_mlp(arrays, &format!("{prefix}.belief_enc"), enc);
    }
    push_mlp(arrays, &format!("{prefix}.trunk"), net.trunk());
}

impl Checkpoint {
    pub fn from_nets(policy: &PolicyNet, value: &ValueNet) -> Self {
        let mut arrays = Vec::new();
        push_net(&mut arrays, "policy", &policy.net);
        if !policy.log_std.is_empty() {
            arrays.push(NamedArray {
                name: "policy.log_std".into(),
                shape: vec![policy.log_std.len()],
                data: policy.log_std.clone(),
            });
        }
        push_net(&mut arrays, "value", &value.net);
        Self {
            version: CHECKPOINT_VERSION,
            policy_config: policy.net.config,
            head: policy.head,
            value_config: value.net.config,
            value_target_mean: value.target_mean,
            value_target_std: value.target_std,
            arrays,
        }
    }

    fn take(&self, name: &str) -> Result<&NamedArray, CheckpointError> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| CheckpointError::MissingArray(name.into()))
    }

    fn fill_mlp(&self, prefix: &str, mlp: &mut Mlp) -> Result<(), CheckpointError> {
        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            for (suffix, dst, shape) in [
                ("w", &mut layer.w, vec![layer.out_dim, layer.in_dim]),
                ("b", &mut layer.b, vec![layer.out_dim]),
            ] {
                let name = format!("{prefix}.{i}.{suffix}");
                let arr = self.take(&name)?;
                let expected: usize = shape.iter().product();
                if arr.data.len() != expected || arr.shape != shape {
                    return Err(CheckpointError::ShapeMismatch {
                        name,
                        shape: arr.shape.clone(),
                        len: arr.data.len(),
                    });
                }
                dst.copy_from_slice(&arr.data);
            }
        }
        Ok(())
    }

    fn fill_net(&self, prefix: &str, net: &mut Net) -> Result<(), CheckpointError> {
        if let Some(enc) = net.state_enc.as_mut() {
            self.fill_mlp(&format!("{prefix}.state_enc"), enc)?;
        }
        if let Some(enc) = net.belief_enc.as_mut() {
            self.fill_mlp(&format!("{prefix}.belief_enc"), enc)?;
        }
        self.fill_mlp(&format!("{prefix}.trunk"), net.trunk_mut())
    }

    pub fn to_nets(&self) -> Result<(PolicyNet, ValueNet), CheckpointError> {
        if self.version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: self.version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let mut policy_net = Net::zeros(self.policy_config);
        self.fill_net("policy", &mut policy_net)?;
        let log_std = match self.head {
            PolicyHead::Categorical => Vec::new(),
            PolicyHead::Gaussian => {
                let arr = self.take("policy.log_std")?;
                arr.data.clone()
            }
        };
        let mut value_net = Net::zeros(self.value_config);
        self.fill_net("value", &mut value_net)?;
        Ok((
            PolicyNet { net: policy_net, head: self.head, log_std },
            ValueNet {
                net: value_net,
                target_mean: self.value_target_mean,
                target_std: self.value_target_std,
            },
        ))
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let json = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }
}

impl Net {
    /// Zero-parameter network with the given architecture (checkpoint
    /// loading target).
    pub fn zeros(config: NetConfig) -> Self {
        let enc = |in_dim: usize, hidden: usize| {
            Mlp::new(vec![
                Dense::zeros(in_dim, hidden, Activation::Tanh),
                Dense::zeros(hidden, hidden, Activation::Tanh),
            ])
        };
        let (state_enc, belief_enc) = if config.encoders {
            (
                Some(enc(config.state_dim, config.hidden)),
                (config.belief_dim > 0).then(|| enc(config.belief_dim, config.hidden)),
            )
        } else {
            (None, None)
        };
        let trunk_in = if config.encoders {
            config.hidden * if config.belief_dim > 0 { 2 } else { 1 }
        } else {
            config.state_dim + config.belief_dim
        };
        let trunk = Mlp::new(vec![
            Dense::zeros(trunk_in, config.hidden, Activation::Tanh),
            Dense::zeros(config.hidden, config.hidden, Activation::Tanh),
            Dense::zeros(config.hidden, config.out_dim, Activation::Linear),
        ]);
        Self { config, state_enc, belief_enc, trunk }
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp {
        &mut self.trunk
    }
}
