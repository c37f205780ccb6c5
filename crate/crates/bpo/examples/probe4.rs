//! Tail-convergence probe used during development.
use bpo::config::parse_config;
use bpo::train::train;

fn main() {
    let alg = std::env::args().nth(1).unwrap_or_else(|| "robust_ensemble".into());
    let n_itr: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let config = parse_config(
        &format!("[run]\nenv = \"tiger\"\nalgorithm = \"{alg}\"\n[train]\nn_itr = {n_itr}\n"),
        &[],
    ).unwrap();
    for seed in 0..2u64 {
        let out = train(&config, seed).unwrap();
        let tail_n = (n_itr / 10).max(1);
        let tail: Vec<f64> = out.diagnostics[n_itr - tail_n..].iter().map(|r| r.mean_return).collect();
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let tail_sd = (tail.iter().map(|r| (r - tail_mean).powi(2)).sum::<f64>() / tail.len() as f64).sqrt();
        let last = &out.diagnostics[n_itr - 1];
        println!(
            "{alg} seed {seed}: tail[{tail_n}] mean {tail_mean:.3} sd {tail_sd:.3}, final entropy {:.4}, best batch {:.3}@{}",
            last.policy_entropy, out.best_mean_return, out.best_iteration
        );
    }
}
