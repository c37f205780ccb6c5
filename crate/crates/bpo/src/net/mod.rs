//! Tiny feed-forward networks with hand-written reverse- and forward-mode
//! differentiation, action distributions, and a versioned checkpoint format.

pub mod checkpoint;
pub mod dist;
pub mod mlp;
pub mod policy;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use dist::DistParams;
pub use policy::{Net, NetConfig, NetTrace, PolicyHead, PolicyNet, ValueNet};
