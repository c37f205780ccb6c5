//! Experiment harness: deterministic training runs, checkpoint evaluation,
//! discretization sweeps, trajectory dumps, the Tiger belief-space oracle,
//! and SVG plots. Exit codes: 0 success, 2 configuration error, 3 runtime
//! failure.

mod plot;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use bpo::bamdp::{derive_stream, sample_latent, stream};
use bpo::config::{load_config, ConfigError, RunConfig};
use bpo::envs::EnvId;
use bpo::net::Checkpoint;
use bpo::sim::{simulate, write_trajectory_csv, SimOptions};
use bpo::train::{
    diagnostics_csv_row, discretization_sweep, evaluate,
    tiger_value_iteration, train, SeedRun, DIAGNOSTICS_HEADER,
};

/// Default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "BPO_OUT_DIR";

#[derive(Parser)]
#[command(name = "bpo", version, about = "Belief-space policy optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Path to the TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Dotted-path overrides, e.g. `--set train.n_itr=50`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: $BPO_OUT_DIR, else `runs`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Rollout worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured seeds and write checkpoints, diagnostics, and a
    /// run manifest.
    Train(ConfigArgs),
    /// Evaluate a checkpoint: mean return with a 95% confidence interval,
    /// plus a per-episode CSV.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Latent-grid resolution sweep on Chain for the encoder and
    /// encoder-free variants.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Grid resolutions to sweep.
        #[arg(long, value_delimiter = ',', default_value = "3,10,100,500,1000")]
        bins: Vec<usize>,
        /// Seeds per (resolution, algorithm) cell.
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
    /// Dump per-step trajectories (states, beliefs, actions, rewards) as
    /// one CSV per episode.
    Rollout {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Pin the latent instead of sampling it, e.g. `--latent 2,2`.
        #[arg(long, value_delimiter = ',')]
        latent: Option<Vec<f64>>,
    },
    /// Belief-grid value iteration for Tiger; prints the optimal value at
    /// the uniform belief.
    Oracle {
        #[arg(long, default_value_t = 0.85)]
        accuracy: f64,
        #[arg(long, default_value_t = 0.95)]
        discount: f64,
        #[arg(long, default_value_t = 1001)]
        grid: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Render CSV artifacts to SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Input CSV files (diagnostics or rollouts, depending on kind).
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Per-coordinate action bound used to reconstruct true positions
        /// in trajectory plots.
        #[arg(long, default_value_t = 1.0)]
        clip: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotKind {
    /// Mean return vs iteration from diagnostics CSVs.
    LearningCurve,
    /// Planar path with one-standard-deviation belief circles from a
    /// rollout CSV.
    Trajectory,
    /// Mean belief entropy per timestep from rollout CSVs.
    Entropy,
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("io: {e}"))
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Eval { config, checkpoint, episodes, seed } => {
            cmd_eval(config, &checkpoint, episodes, seed)
        }
        Command::Sweep { config, bins, seeds } => cmd_sweep(config, &bins, seeds),
        Command::Rollout { config, checkpoint, episodes, seed, latent } => {
            cmd_rollout(config, &checkpoint, episodes, seed, latent)
        }
        Command::Oracle { accuracy, discount, grid, tol } => cmd_oracle(accuracy, discount, grid, tol),
        Command::Plot { kind, input, out, clip } => cmd_plot(kind, &input, &out, clip),
    }
}

fn setup(args: &ConfigArgs) -> Result<(RunConfig, PathBuf), CliError> {
    if let Some(workers) = args.workers {
        rayon_pool(workers);
    }
    let config = load_config(&args.config, &args.overrides)?;
    let out = args
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"));
    fs::create_dir_all(&out)?;
    Ok((config, out))
}

fn rayon_pool(workers: usize) {
    // Ignore failure: the global pool can only be sized once per process.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global();
}

fn binary_sha256() -> String {
    let Ok(path) = std::env::current_exe() else {
        return "unknown".into();
    };
    match fs::read(&path) {
        Ok(bytes) => {
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            format!("{:x}", hasher.finalize())
        }
        Err(_) => "unknown".into(),
    }
}

#[derive(serde::Serialize)]
struct SeedSummary {
    seed: u64,
    eval_mean: f64,
    eval_ci95: Option<f64>,
    best_iteration: usize,
    best_batch_return: f64,
    total_steps: u64,
}

#[derive(serde::Serialize)]
struct Manifest<'a> {
    version: u32,
    command: &'a str,
    config: &'a RunConfig,
    seeds: Vec<u64>,
    eval_episodes: usize,
    binary_sha256: String,
    wallclock_s: f64,
    per_seed: Vec<SeedSummary>,
    best_seed: u64,
    best_eval_mean: f64,
}

fn cmd_train(args: ConfigArgs) -> Result<(), CliError> {
    let (config, out) = setup(&args)?;
    let started = Instant::now();
    let seeds: Vec<u64> = (0..config.run.n_seeds as u64)
        .map(|i| config.run.seed.wrapping_add(i))
        .collect();

    let mut runs: Vec<SeedRun> = Vec::with_capacity(seeds.len());
    for &seed in &seeds {
        let outcome = train(&config, seed).map_err(runtime)?;
        let eval =
            evaluate(&outcome.policy, &config, config.run.eval_episodes, seed).map_err(runtime)?;

        let diag_path = out.join(format!("diagnostics_seed{seed}.csv"));
        let mut file = fs::File::create(&diag_path)?;
        writeln!(file, "{DIAGNOSTICS_HEADER}")?;
        for row in &outcome.diagnostics {
            writeln!(file, "{}", diagnostics_csv_row(row))?;
        }

        let ck = Checkpoint::from_nets(&outcome.policy, &outcome.value);
        ck.save(&out.join(format!("checkpoint_seed{seed}.json")))
            .map_err(runtime)?;

        println!(
            "seed {seed}: eval mean {:.3} ci {} (best batch return {:.3} at iteration {})",
            eval.mean,
            eval.ci95.map_or("n/a".into(), |c| format!("{c:.3}")),
            outcome.best_mean_return,
            outcome.best_iteration,
        );
        runs.push(SeedRun { seed, outcome, eval });
    }

    let best = runs
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.eval.mean.partial_cmp(&b.eval.mean).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let best_run = &runs[best];
    Checkpoint::from_nets(&best_run.outcome.policy, &best_run.outcome.value)
        .save(&out.join("checkpoint_best.json"))
        .map_err(runtime)?;

    let manifest = Manifest {
        version: 1,
        command: "train",
        config: &config,
        seeds: seeds.clone(),
        eval_episodes: config.run.eval_episodes,
        binary_sha256: binary_sha256(),
        wallclock_s: started.elapsed().as_secs_f64(),
        per_seed: runs
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                eval_mean: r.eval.mean,
                eval_ci95: r.eval.ci95,
                best_iteration: r.outcome.best_iteration,
                best_batch_return: r.outcome.best_mean_return,
                total_steps: r.outcome.total_steps,
            })
            .collect(),
        best_seed: best_run.seed,
        best_eval_mean: best_run.eval.mean,
    };
    fs::write(
        out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(runtime)?,
    )?;
    println!(
        "best seed {} with eval mean {:.3}; artifacts in {}",
        best_run.seed,
        best_run.eval.mean,
        out.display()
    );
    Ok(())
}

fn load_policy(config: &RunConfig, path: &Path) -> Result<bpo::net::PolicyNet, CliError> {
    let ck = Checkpoint::load(path)
        .map_err(|e| CliError::Runtime(format!("checkpoint {}: {e}", path.display())))?;
    let (policy, _) = ck.to_nets().map_err(runtime)?;
    let env = config.make_env();
    let (state_dim, belief_dim) =
        bpo::sim::policy_input_dims(env.as_ref(), config.run.algorithm.input_mode());
    let pc = policy.net.config;
    if pc.state_dim != state_dim || pc.belief_dim != belief_dim {
        return Err(CliError::Config(format!(
            "checkpoint expects inputs ({}, {}), config implies ({state_dim}, {belief_dim})",
            pc.state_dim, pc.belief_dim
        )));
    }
    Ok(policy)
}

fn cmd_eval(
    args: ConfigArgs,
    checkpoint: &Path,
    episodes: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let (config, out) = setup(&args)?;
    let policy = load_policy(&config, checkpoint)?;
    let n_episodes = episodes.unwrap_or(config.run.eval_episodes);
    let eval_seed = seed.unwrap_or(config.run.seed);
    let report = evaluate(&policy, &config, n_episodes, eval_seed).map_err(runtime)?;

    let path = out.join("eval_returns.csv");
    let mut file = fs::File::create(&path)?;
    writeln!(file, "episode,return")?;
    for (i, r) in report.returns.iter().enumerate() {
        writeln!(file, "{i},{r}")?;
    }
    match report.ci95 {
        Some(ci) => println!(
            "mean return {:.4} +/- {:.4} (95% CI over {n_episodes} episodes)",
            report.mean, ci
        ),
        None => println!(
            "mean return {:.4} (CI undefined: {n_episodes} episode(s))",
            report.mean
        ),
    }
    println!("per-episode returns: {}", path.display());
    Ok(())
}

fn cmd_sweep(args: ConfigArgs, bins: &[usize], seeds: usize) -> Result<(), CliError> {
    let (mut config, out) = setup(&args)?;
    if config.run.env != EnvId::Chain {
        return Err(CliError::Config(format!(
            "the sweep runs on chain, config selects {}",
            config.run.env
        )));
    }
    config.run.n_seeds = seeds;
    let rows = discretization_sweep(&config, bins, seeds).map_err(runtime)?;

    let path = out.join("sweep.csv");
    let mut file = fs::File::create(&path)?;
    writeln!(file, "latent_bins,algorithm,seed,eval_mean,eval_ci95")?;
    for r in &rows {
        writeln!(
            file,
            "{},{},{},{},{}",
            r.latent_bins,
            r.algorithm,
            r.seed,
            r.eval_mean,
            r.eval_ci95.map_or(String::new(), |c| c.to_string())
        )?;
    }
    println!("{:<12} {:<12} {:>12} {:>12}", "latent_bins", "algorithm", "mean", "best");
    for &b in bins {
        for alg in [bpo::config::Algorithm::Bpo, bpo::config::Algorithm::BpoMinus] {
            if let Some((mean, best)) = bpo::train::sweep::summarize(&rows, b, alg) {
                println!("{b:<12} {alg:<12} {mean:>12.2} {best:>12.2}");
            }
        }
    }
    println!("rows: {}", path.display());
    Ok(())
}

fn cmd_rollout(
    args: ConfigArgs,
    checkpoint: &Path,
    episodes: usize,
    seed: Option<u64>,
    latent: Option<Vec<f64>>,
) -> Result<(), CliError> {
    let (config, out) = setup(&args)?;
    let policy = load_policy(&config, checkpoint)?;
    let template = config.make_env();
    if let Some(latent) = &latent {
        if latent.len() != template.spec().latent_dim() {
            return Err(CliError::Config(format!(
                "--latent needs {} component(s), got {}",
                template.spec().latent_dim(),
                latent.len()
            )));
        }
    }
    let opts = SimOptions::new(config.run.algorithm.input_mode());
    let base_seed = seed.unwrap_or(config.run.seed);
    for ep in 0..episodes {
        let mut env = template.clone_box();
        let mut rng = derive_stream(base_seed, stream::EVAL, ep as u64, 0);
        let sampled = sample_latent(env.spec(), &mut rng);
        let phi = latent.as_deref().unwrap_or(&sampled);
        let traj = simulate(env.as_mut(), &policy, &opts, phi, &mut rng).map_err(runtime)?;
        let path = out.join(format!("rollout_{ep:04}.csv"));
        let mut file = fs::File::create(&path)?;
        write_trajectory_csv(&mut file, &traj, base_seed, ep as u64)?;
    }
    println!("wrote {episodes} rollout file(s) to {}", out.display());
    Ok(())
}

fn cmd_oracle(accuracy: f64, discount: f64, grid: usize, tol: f64) -> Result<(), CliError> {
    if !(accuracy > 0.5 && accuracy <= 1.0) {
        return Err(CliError::Config(format!(
            "accuracy must lie in (0.5, 1], got {accuracy}"
        )));
    }
    if !(0.0..1.0).contains(&discount) {
        return Err(CliError::Config(format!(
            "discount must lie in [0, 1), got {discount}"
        )));
    }
    let oracle = tiger_value_iteration(accuracy, discount, grid, tol);
    println!(
        "V*(uniform belief) = {:.6}  ({} sweeps, residual {:.2e})",
        oracle.value_at_uniform, oracle.iterations, oracle.residual
    );
    // Report where the greedy policy stops listening.
    let n = oracle.values.len();
    let threshold = oracle
        .greedy
        .iter()
        .position(|a| *a == bpo::train::TigerAction::Listen)
        .map(|i| i as f64 / (n - 1) as f64);
    if let Some(t) = threshold {
        println!("listen region: belief in [{t:.4}, {:.4}]", 1.0 - t);
    }
    Ok(())
}

// -- plots ------------------------------------------------------------

struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
    latent: Vec<f64>,
}

fn read_csv(path: &Path) -> Result<CsvTable, CliError> {
    let text = fs::read_to_string(path)?;
    let mut header = Vec::new();
    let mut rows = Vec::new();
    let mut latent = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix('#') {
            if let (Some(start), Some(end)) = (rest.find('['), rest.find(']')) {
                latent = rest[start + 1..end]
                    .split(',')
                    .filter_map(|s| s.trim().parse().ok())
                    .collect();
            }
            continue;
        }
        if header.is_empty() {
            header = line.split(',').map(str::to_string).collect();
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse().unwrap_or(f64::NAN))
            .collect();
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if header.is_empty() {
        return Err(CliError::Runtime(format!("{}: empty CSV", path.display())));
    }
    Ok(CsvTable { header, rows, latent })
}

fn column(table: &CsvTable, name: &str) -> Result<Vec<f64>, CliError> {
    let idx = table
        .header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Runtime(format!("missing CSV column `{name}`")))?;
    Ok(table.rows.iter().map(|r| r[idx]).collect())
}

fn belief_columns(table: &CsvTable) -> Vec<usize> {
    table
        .header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with("belief_"))
        .map(|(i, _)| i)
        .collect()
}

fn cmd_plot(kind: PlotKind, inputs: &[PathBuf], out: &Path, clip: f64) -> Result<(), CliError> {
    let svg = match kind {
        PlotKind::LearningCurve => {
            let mut series = Vec::new();
            for path in inputs {
                let table = read_csv(path)?;
                let x = column(&table, "iteration")?;
                let y = column(&table, "mean_return")?;
                series.push(plot::Series {
                    label: path
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    points: x.into_iter().zip(y).collect(),
                });
            }
            plot::line_chart("Learning curve", "iteration", "mean return", &series)
        }
        PlotKind::Trajectory => {
            let table = read_csv(&inputs[0])?;
            let beliefs = belief_columns(&table);
            if beliefs.len() != 4 {
                return Err(CliError::Runtime(
                    "trajectory plots need Gaussian beliefs (4 columns: mean x/y, var x/y)".into(),
                ));
            }
            if table.latent.len() != 2 {
                return Err(CliError::Runtime("rollout header lacks a planar latent".into()));
            }
            let act0 = column(&table, "action_0")?;
            let act1 = column(&table, "action_1")?;
            let mut true_path = vec![(table.latent[0], table.latent[1])];
            for (&ax, &ay) in act0.iter().zip(&act1) {
                if ax.is_nan() {
                    break;
                }
                let (px, py) = *true_path.last().unwrap();
                true_path.push((px + ax.clamp(-clip, clip), py + ay.clamp(-clip, clip)));
            }
            let goal = (
                column(&table, "state_0")?[0],
                column(&table, "state_1")?[0],
            );
            let belief_means: Vec<(f64, f64)> = table
                .rows
                .iter()
                .map(|r| (r[beliefs[0]], r[beliefs[1]]))
                .collect();
            let belief_stds: Vec<f64> = table.rows.iter().map(|r| r[beliefs[2]].sqrt()).collect();
            plot::trajectory_chart(
                "Rollout: belief path (1 std) and true path",
                &plot::TrajectoryPlot {
                    belief_means,
                    belief_stds,
                    true_path,
                    goal,
                    light_x: bpo::envs::LIGHT_X,
                },
            )
        }
        PlotKind::Entropy => {
            let mut per_step: Vec<Vec<f64>> = Vec::new();
            for path in inputs {
                let table = read_csv(path)?;
                let beliefs = belief_columns(&table);
                for (t, row) in table.rows.iter().enumerate() {
                    let values: Vec<f64> = beliefs.iter().map(|&i| row[i]).collect();
                    let entropy = belief_entropy_from_features(&values);
                    if per_step.len() <= t {
                        per_step.push(Vec::new());
                    }
                    per_step[t].push(entropy);
                }
            }
            let points: Vec<(f64, f64)> = per_step
                .iter()
                .enumerate()
                .map(|(t, xs)| (t as f64, xs.iter().sum::<f64>() / xs.len() as f64))
                .collect();
            plot::line_chart(
                "Belief entropy per timestep",
                "t",
                "entropy (nats)",
                &[plot::Series { label: "mean".into(), points }],
            )
        }
    };
    plot::write_svg(out, &svg)?;
    println!("wrote {}", out.display());
    Ok(())
}

/// Entropy of a belief feature row: categorical when the entries are a
/// probability vector, otherwise Gaussian `[mean.., var..]`.
fn belief_entropy_from_features(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let nonneg = values.iter().all(|&x| x >= 0.0);
    if nonneg && (sum - 1.0).abs() < 1e-6 {
        -values
            .iter()
            .filter(|&&x| x > 0.0)
            .map(|&x| x * x.ln())
            .sum::<f64>()
    } else {
        let dim = values.len() / 2;
        values[dim..]
            .iter()
            .map(|&v| 0.5 * (std::f64::consts::TAU * std::f64::consts::E * v).ln())
            .sum()
    }
}
