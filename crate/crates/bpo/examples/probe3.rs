//! Baseline probe used during development.
use bpo::config::parse_config;
use bpo::train::{evaluate, train};

fn main() {
    let alg = std::env::args().nth(1).unwrap_or_else(|| "robust_ensemble".into());
    let n_itr: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(300);
    let config = parse_config(
        &format!("[run]\nenv = \"tiger\"\nalgorithm = \"{alg}\"\n[train]\nn_itr = {n_itr}\n"),
        &[],
    ).unwrap();
    for seed in 0..3u64 {
        let out = train(&config, seed).unwrap();
        let eval = evaluate(&out.policy, &config, 300, seed).unwrap();
        println!("{alg} seed {seed}: eval {:.3} ci {:?} (best batch {:.3})", eval.mean, eval.ci95, out.best_mean_return);
    }
}
