//! Quick training probe used during development.
use bpo::config::parse_config;
use bpo::train::{evaluate, train};

fn main() {
    let n_itr: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let config = parse_config(
        &format!("[run]\nenv = \"tiger\"\nalgorithm = \"bpo\"\n[train]\nn_itr = {n_itr}\n"),
        &[],
    )
    .unwrap();
    let start = std::time::Instant::now();
    let out = train(&config, 0).unwrap();
    let train_s = start.elapsed().as_secs_f64();
    for row in out.diagnostics.iter().step_by((n_itr / 20).max(1)) {
        println!(
            "iter {:4}  return {:8.3}  kl {:.5}  entropy {:.3}  belief_H {:.3}  skipped {}",
            row.iteration, row.mean_return, row.mean_kl, row.policy_entropy,
            row.belief_entropy_mean, row.skipped
        );
    }
    println!("best iter {} return {:.3}", out.best_iteration, out.best_mean_return);
    println!("train: {train_s:.1}s ({:.3}s/iter)", train_s / n_itr as f64);
    let eval = evaluate(&out.policy, &config, 200, 12345).unwrap();
    println!("eval mean {:.3} ci {:?}", eval.mean, eval.ci95);
}
