//! Discretization sweep on Chain: train the encoder and encoder-free
//! variants across latent-grid resolutions and tabulate evaluation returns.

use crate::config::{Algorithm, RunConfig};
use crate::envs::EnvId;
use crate::error::TrainError;
use crate::train::{confidence_interval, evaluate, train};

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub latent_bins: usize,
    pub algorithm: Algorithm,
    pub seed: u64,
    pub eval_mean: f64,
    pub eval_ci95: Option<f64>,
}

/// Train `bpo` and `bpo_minus` at each grid resolution under the same
/// budget, `seeds_per_cell` seeds each, and evaluate every run. The base
/// config's environment must be Chain.
pub fn discretization_sweep(
    base: &RunConfig,
    bins: &[usize],
    seeds_per_cell: usize,
) -> Result<Vec<SweepRow>, TrainError> {
    assert_eq!(base.run.env, EnvId::Chain, "the sweep targets Chain");
    let mut rows = Vec::new();
    for &latent_bins in bins {
        for algorithm in [Algorithm::Bpo, Algorithm::BpoMinus] {
            for offset in 0..seeds_per_cell as u64 {
                let mut config = base.clone();
                config.train.latent_bins = latent_bins;
                config.run.algorithm = algorithm;
                let seed = base.run.seed.wrapping_add(offset);
                let outcome = train(&config, seed)?;
                let eval = evaluate(&outcome.policy, &config, config.run.eval_episodes, seed)
                    .map_err(|source| TrainError::Simulation { iteration: usize::MAX, source })?;
                rows.push(SweepRow {
                    latent_bins,
                    algorithm,
                    seed,
                    eval_mean: eval.mean,
                    eval_ci95: confidence_interval(&eval.returns),
                });
            }
        }
    }
    Ok(rows)
}

/// Mean and best-seed summary for one `(bins, algorithm)` cell.
pub fn summarize(rows: &[SweepRow], bins: usize, algorithm: Algorithm) -> Option<(f64, f64)> {
    let cell: Vec<&SweepRow> = rows
        .iter()
        .filter(|r| r.latent_bins == bins && r.algorithm == algorithm)
        .collect();
    if cell.is_empty() {
        return None;
    }
    let mean = cell.iter().map(|r| r.eval_mean).sum::<f64>() / cell.len() as f64;
    let best = cell.iter().map(|r| r.eval_mean).fold(f64::NEG_INFINITY, f64::max);
    Some((mean, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn sweep_emits_one_row_per_cell_and_seed() {
        let base = parse_config(
            "[run]\nenv = \"chain\"\neval_episodes = 4\n\
             [train]\nhorizon = 8\nbatch_size = 16\nn_itr = 2\n[net]\nhidden = 6\n",
            &[],
        )
        .unwrap();
        let rows = discretization_sweep(&base, &[1, 3], 2).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        let (mean, best) = summarize(&rows, 3, Algorithm::Bpo).unwrap();
        assert!(best >= mean);
        assert!(summarize(&rows, 99, Algorithm::Bpo).is_none());
    }
}
