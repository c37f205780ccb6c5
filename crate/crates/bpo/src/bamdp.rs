//! Bayes-adaptive MDP descriptions: latent priors, latent grids, and
//! deterministic per-trajectory random streams.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SpecError;

/// Action space of the underlying MDP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ActionSpace {
    /// `n` discrete actions, indexed `0..n`.
    Discrete(usize),
    /// `dim`-dimensional continuous actions. `clip` bounds each coordinate
    /// to `[-clip, clip]` when the environment executes the action.
    Continuous { dim: usize, clip: f64 },
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Discrete(n) => *n,
            ActionSpace::Continuous { dim, .. } => *dim,
        }
    }
}

/// A sampled action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Action {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl Action {
    /// Index of a discrete action; panics if the action is continuous.
    pub fn index(&self) -> usize {
        match self {
            Action::Discrete(i) => *i,
            Action::Continuous(_) => panic!("expected a discrete action"),
        }
    }

    /// Components of a continuous action; panics if the action is discrete.
    pub fn vector(&self) -> &[f64] {
        match self {
            Action::Continuous(v) => v,
            Action::Discrete(_) => panic!("expected a continuous action"),
        }
    }
}

/// Prior over one latent dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatentPrior {
    /// Uniform over the closed interval `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Uniform over a finite, nonempty support.
    Finite(Vec<f64>),
}

impl LatentPrior {
    pub fn validate(&self) -> Result<(), SpecError> {
        match self {
            LatentPrior::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(SpecError::new(format!(
                        "latent range must satisfy low < high, got [{low}, {high}]"
                    )));
                }
            }
            LatentPrior::Finite(support) => {
                if support.is_empty() {
                    return Err(SpecError::new("finite latent support must be nonempty"));
                }
            }
        }
        Ok(())
    }

    /// Low/high bounds of the prior's support.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            LatentPrior::Uniform { low, high } => (*low, *high),
            LatentPrior::Finite(support) => {
                let lo = support.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = support.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match self {
            LatentPrior::Uniform { low, high } => rng.gen_range(*low..*high),
            LatentPrior::Finite(support) => support[rng.gen_range(0..support.len())],
        }
    }
}

/// Static description of a parameterized MDP family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BamdpSpec {
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub latent_prior: Vec<LatentPrior>,
    pub discount: f64,
    pub horizon: usize,
}

impl BamdpSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(SpecError::new(format!(
                "discount must lie in [0, 1], got {}",
                self.discount
            )));
        }
        if self.horizon == 0 {
            return Err(SpecError::new("horizon must be at least 1"));
        }
        if self.latent_prior.is_empty() {
            return Err(SpecError::new("at least one latent dimension is required"));
        }
        for prior in &self.latent_prior {
            prior.validate()?;
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_prior.len()
    }
}

/// Draw a latent parameter vector from the prior, one independent draw per
/// dimension. Continuous dimensions are sampled in the continuous space
/// regardless of any grid used for belief tracking.
pub fn sample_latent(spec: &BamdpSpec, rng: &mut impl Rng) -> Vec<f64> {
    spec.latent_prior.iter().map(|p| p.sample(rng)).collect()
}

/// Uniform discretization of the latent space used for categorical beliefs.
///
/// Each continuous dimension is split into `bins_per_dim` equal-width bins
/// represented by their midpoints; finite dimensions contribute their support
/// directly. Centers enumerate the cross product in row-major order (last
/// dimension fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    bins: Vec<Vec<f64>>,
    centers: Vec<Vec<f64>>,
}

impl LatentGrid {
    pub fn new(priors: &[LatentPrior], bins_per_dim: usize) -> Result<Self, SpecError> {
        if bins_per_dim == 0 {
            return Err(SpecError::new("bins_per_dim must be at least 1"));
        }
        let mut bins = Vec::with_capacity(priors.len());
        for prior in priors {
            prior.validate()?;
            match prior {
                LatentPrior::Uniform { low, high } => {
                    let width = (high - low) / bins_per_dim as f64;
                    let centers = (0..bins_per_dim)
                        .map(|i| low + width * (i as f64 + 0.5))
                        .collect();
                    bins.push(centers);
                }
                LatentPrior::Finite(support) => bins.push(support.clone()),
            }
        }
        let mut centers = vec![Vec::new()];
        for dim in &bins {
            let mut next = Vec::with_capacity(centers.len() * dim.len());
            for prefix in &centers {
                for &v in dim {
                    let mut c = prefix.clone();
                    c.push(v);
                    next.push(c);
                }
            }
            centers = next;
        }
        Ok(Self { bins, centers })
    }

    /// Number of grid cells (the categorical belief length).
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Latent vector at the center of cell `i`.
    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i]
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Per-dimension bin centers.
    pub fn dims(&self) -> &[Vec<f64>] {
        &self.bins
    }
}

/// Derive an independent, reproducible random stream from a base seed and a
/// stream coordinate. Trajectory `j` of iteration `i` always receives the
/// same stream no matter how rollouts are scheduled across workers.
pub fn derive_stream(seed: u64, tag: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&major.to_le_bytes());
    key[24..32].copy_from_slice(&minor.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Stream tags; distinct tags decouple the consumers of a single seed.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const ROLLOUT: u64 = 2;
    pub const EVAL: u64 = 3;
    pub const VALUE_FIT: u64 = 4;
}

/// Standard normal draw via Box-Muller. Consumes exactly two uniforms.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_spec(tied: bool) -> BamdpSpec {
        let dims = if tied { 1 } else { 2 };
        BamdpSpec {
            state_dim: 5,
            action_space: ActionSpace::Discrete(2),
            latent_prior: vec![LatentPrior::Uniform { low: 0.0, high: 1.0 }; dims],
            discount: 1.0,
            horizon: 100,
        }
    }

    #[test]
    fn tied_prior_samples_unit_interval_uniformly() {
        let spec = chain_spec(true);
        let mut rng = derive_stream(7, stream::ROLLOUT, 0, 0);
        let n = 10_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let phi = sample_latent(&spec, &mut rng);
            assert_eq!(phi.len(), 1);
            assert!((0.0..=1.0).contains(&phi[0]));
            sum += phi[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean} too far from 0.5");
    }

    #[test]
    fn same_seed_gives_identical_latents() {
        let spec = chain_spec(true);
        let a = sample_latent(&spec, &mut derive_stream(3, stream::ROLLOUT, 5, 9));
        let b = sample_latent(&spec, &mut derive_stream(3, stream::ROLLOUT, 5, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn semitied_prior_draws_two_independent_slips() {
        let spec = chain_spec(false);
        let mut rng = derive_stream(11, stream::ROLLOUT, 0, 0);
        let n = 20_000;
        let mut cov = 0.0;
        let mut mean = [0.0f64; 2];
        let samples: Vec<_> = (0..n).map(|_| sample_latent(&spec, &mut rng)).collect();
        for phi in &samples {
            assert_eq!(phi.len(), 2);
            mean[0] += phi[0];
            mean[1] += phi[1];
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for phi in &samples {
            cov += (phi[0] - mean[0]) * (phi[1] - mean[1]);
        }
        cov /= n as f64;
        // Independent U[0,1] pairs have zero covariance; 1/12 variance scale.
        assert!(cov.abs() < 0.01, "covariance {cov} suggests coupling");
    }

    #[test]
    fn grid_centers_are_bin_midpoints_in_row_major_order() {
        let priors = vec![
            LatentPrior::Uniform { low: 0.0, high: 1.0 },
            LatentPrior::Uniform { low: 0.0, high: 1.0 },
        ];
        let grid = LatentGrid::new(&priors, 2).unwrap();
        assert_eq!(grid.len(), 4);
        assert_eq!(grid.center(0), &[0.25, 0.25]);
        assert_eq!(grid.center(1), &[0.25, 0.75]);
        assert_eq!(grid.center(2), &[0.75, 0.25]);
        assert_eq!(grid.center(3), &[0.75, 0.75]);
    }

    #[test]
    fn grid_over_finite_support_uses_the_support() {
        let priors = vec![LatentPrior::Finite(vec![0.0, 1.0])];
        let grid = LatentGrid::new(&priors, 17).unwrap();
        assert_eq!(grid.len(), 2);
        assert_eq!(grid.center(0), &[0.0]);
        assert_eq!(grid.center(1), &[1.0]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = chain_spec(true);
        spec.discount = 1.5;
        assert!(spec.validate().is_err());
        let mut spec = chain_spec(true);
        spec.horizon = 0;
        assert!(spec.validate().is_err());
        let bad = LatentPrior::Uniform { low: 1.0, high: 0.0 };
        assert!(bad.validate().is_err());
        assert!(LatentPrior::Finite(vec![]).validate().is_err());
    }
}
