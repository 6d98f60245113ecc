use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sher_core::agents::{agent_from_checkpoint, loss_gradient_errors, AgentKind, Checkpoint, GRAD_CHECK_STEP};
use sher_core::envs::{EnvKind, TabularGoalMDP};
use sher_core::oracle::{hard_value_iteration, soft_value_iteration, tabular_soft_q_learning, DEFAULT_TOL};
use sher_core::replay::RelabelStrategy;
use sher_core::trainer::{compare_agents, evaluate, parse_list, run_training, sweep_alpha, RunConfig, TrainError};

#[derive(Parser)]
#[command(name = "sher", version, about = "Goal-conditioned soft actor-critic with hindsight relabelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent on every listed seed.
    Train(RunArgs),
    /// Greedy success rate of a saved checkpoint.
    Eval(EvalArgs),
    /// Train once per temperature and compare final success.
    SweepAlpha {
        /// Comma-separated temperatures.
        #[arg(default_value = "0.03,0.05,0.1")]
        alphas: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train SHER and HER-DDPG with the same seeds and report both.
    Compare(RunArgs),
    /// Check the soft solvers on the tabular grid.
    OracleCheck(OracleArgs),
    /// Finite-difference audit of every learner loss.
    GradCheck {
        #[arg(long, default_value_t = 20)]
        batches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Run settings; flags override values read from `--config`.
#[derive(Args)]
struct RunArgs {
    /// File of `key=value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    agent: Option<AgentKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    strategy: Option<RelabelStrategy>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated seed list.
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, TrainError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.env {
            cfg.env = v;
        }
        if let Some(v) = self.agent {
            cfg.agent = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.k {
            cfg.k = v;
        }
        if let Some(v) = self.strategy {
            cfg.strategy = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = &self.seed {
            cfg.seeds = parse_list("seed", v)?;
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        for kv in &self.set {
            cfg.apply_str(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value = "point-reach")]
    env: EnvKind,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value = "grid")]
    env: EnvKind,
    /// Grid side length.
    #[arg(long, default_value_t = 5)]
    size: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    #[arg(long, default_value_t = 600_000)]
    steps: usize,
    #[arg(long, default_value_t = 0.5)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn train(cfg: &RunConfig) -> anyhow::Result<()> {
    let runs = run_training(cfg)?;
    for r in &runs {
        if let Some(last) = r.reports.last() {
            println!(
                "seed {}: final s_test {:.3} s_train {:.3} delta_s {:.3}",
                r.seed, last.s_test, last.s_train, last.delta_s
            );
        }
    }
    println!("outputs in {}", cfg.out_dir.display());
    Ok(())
}

fn eval(args: &EvalArgs) -> anyhow::Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint)
        .map_err(TrainError::from)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let agent = agent_from_checkpoint(&ckpt).map_err(TrainError::from)?;
    let mut env = args
        .env
        .make()
        .ok_or_else(|| TrainError::Config(format!("{} is not a continuous env", args.env)))?;
    if args.episodes == 0 {
        return Err(TrainError::Config("episodes must be positive".into()).into());
    }
    let seeds: Vec<u64> = (0..args.episodes as u64).map(|i| (args.seed + i) * 2 + 1).collect();
    let rate = evaluate(env.as_mut(), agent.as_ref(), &seeds, &mut ChaCha8Rng::seed_from_u64(args.seed))?;
    println!("{} on {}: success rate {rate:.3} over {} episodes", agent.kind(), args.env, args.episodes);
    Ok(())
}

fn sweep(alphas: &str, cfg: &RunConfig) -> anyhow::Result<()> {
    let alphas: Vec<f64> = parse_list("alpha", alphas)?;
    let sweep = sweep_alpha(cfg, &alphas)?;
    println!("alpha  final_s_test_mean  final_s_test_std  mean_delta_s");
    for s in &sweep.summaries {
        println!(
            "{:<6} {:>17.3} {:>17.3} {:>13.3}",
            s.alpha, s.final_s_test_mean, s.final_s_test_std, s.mean_delta_s
        );
    }
    if sweep.flagged {
        println!("REVIEW: final success rates are indistinguishable across temperatures");
    }
    Ok(())
}

fn compare(cfg: &RunConfig) -> anyhow::Result<()> {
    let cmp = compare_agents(cfg)?;
    print!("{}", cmp.table);
    for a in &cmp.agents {
        println!("{}: median delta_s {:.3}", a.kind, a.median_delta_s);
    }
    Ok(())
}

fn oracle_check(args: &OracleArgs) -> anyhow::Result<()> {
    if args.env != EnvKind::Grid {
        return Err(TrainError::Config("oracle-check runs on the grid env".into()).into());
    }
    if args.size == 0 {
        return Err(TrainError::Config("size must be positive".into()).into());
    }
    let cfg_err = |e: sher_core::oracle::OracleError| TrainError::Config(e.to_string());
    let mdp = TabularGoalMDP::grid(args.size, args.size);
    let soft = soft_value_iteration(&mdp, args.alpha, args.gamma, DEFAULT_TOL).map_err(cfg_err)?;
    println!("soft value iteration: {} sweeps", soft.iterations);

    let near_zero = soft_value_iteration(&mdp, 1e-6, args.gamma, DEFAULT_TOL).map_err(cfg_err)?;
    let hard = hard_value_iteration(&mdp, args.gamma, DEFAULT_TOL).map_err(cfg_err)?;
    let hard_gap = sup_gap(&near_zero.q, &hard.q);
    println!("alpha=1e-6 vs hard value iteration: sup gap {hard_gap:.3e}");

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let q = tabular_soft_q_learning(&mdp, args.alpha, args.gamma, args.steps, args.lr, &mut rng).map_err(cfg_err)?;
    let q_gap = sup_gap(&q, &soft.q);
    println!("soft Q-learning ({} steps) vs fixed point: sup gap {q_gap:.3e}", args.steps);

    if hard_gap >= 1e-4 || q_gap >= 1e-2 {
        return Err(TrainError::Numerical("oracle gaps exceed tolerance (1e-4 hard limit, 1e-2 Q-learning)".into()).into());
    }
    println!("ok");
    Ok(())
}

fn grad_check(batches: usize, seed: u64) -> anyhow::Result<()> {
    let checks = loss_gradient_errors(batches, seed).map_err(TrainError::from)?;
    let mut ok = true;
    for c in &checks {
        let pass = c.max_error < 1e-4;
        ok &= pass;
        println!("{:<18} max relative error {:.3e} {}", c.name, c.max_error, if pass { "ok" } else { "FAIL" });
    }
    println!("{batches} batches, step {GRAD_CHECK_STEP:e}");
    if !ok {
        return Err(TrainError::Numerical("gradient mismatch".into()).into());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Train(run) => train(&run.resolve()?),
        Command::Eval(args) => eval(&args),
        Command::SweepAlpha { alphas, run } => sweep(&alphas, &run.resolve()?),
        Command::Compare(run) => compare(&run.resolve()?),
        Command::OracleCheck(args) => oracle_check(&args),
        Command::GradCheck { batches, seed } => grad_check(batches, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<TrainError>().map_or(1, TrainError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
