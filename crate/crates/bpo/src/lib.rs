//! Belief-space policy optimization for Bayes-adaptive MDPs.
//!
//! The crate provides: latent-MDP descriptions and seeded sampling
//! ([`bamdp`]), black-box Bayes filters ([`filters`]), benchmark
//! environments ([`envs`]), dual state/belief encoder networks with manual
//! differentiation ([`net`]), a KL-constrained batch policy optimizer
//! ([`trpo`]), and training/evaluation loops with a value-iteration oracle
//! for the Tiger problem ([`train`]).

pub mod bamdp;
pub mod belief;
pub mod config;
pub mod envs;
pub mod error;
pub mod filters;
pub mod net;
pub mod sim;
pub mod train;
pub mod trpo;

pub use bamdp::{derive_stream, sample_latent, Action, ActionSpace, BamdpSpec, LatentGrid, LatentPrior};
pub use belief::Belief;
pub use error::{FilterError, SimError, SpecError, TrainError};
