use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{aggregate_epochs, write_progress_csv, write_summary_csv, EpochReport};
use super::{RunConfig, TrainError};
use crate::agents::{build_agent, ActMode, Agent};
use crate::envs::{is_success, GoalEnv};
use crate::replay::{EpisodeRecord, ReplayBuffer, Transition};

/// Independent random streams derived from one run seed.
struct Streams {
    init: ChaCha8Rng,
    act: ChaCha8Rng,
    update: ChaCha8Rng,
    train_env: ChaCha8Rng,
    eval_env: ChaCha8Rng,
    eval_act: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        Self {
            init: stream(0),
            act: stream(1),
            update: stream(2),
            train_env: stream(3),
            eval_env: stream(4),
            eval_act: stream(5),
        }
    }

    /// Training episodes use even env seeds, evaluation episodes odd ones,
    /// so evaluation goals never coincide with training goals.
    fn train_env_seed(&mut self) -> u64 {
        self.train_env.next_u64() & !1
    }

    fn eval_env_seed(&mut self) -> u64 {
        self.eval_env.next_u64() | 1
    }
}

/// One full episode. Every stored `done` is false: the horizon is a time
/// limit, not a terminal state.
pub fn rollout(
    env: &mut dyn GoalEnv,
    agent: &dyn Agent,
    env_seed: u64,
    mode: ActMode,
    rng: &mut dyn RngCore,
) -> Result<EpisodeRecord, TrainError> {
    let mut obs = env.reset(env_seed);
    let mut transitions = Vec::with_capacity(env.spec().horizon);
    loop {
        let action = agent.act(&obs, mode, rng)?;
        let step = env.step(&action)?;
        let finished = step.done;
        transitions.push(Transition {
            obs,
            action,
            reward: step.reward,
            next_obs: step.obs.clone(),
            done: false,
        });
        obs = step.obs;
        if finished {
            break;
        }
    }
    Ok(EpisodeRecord::new(transitions)?)
}

/// Fraction of greedy episodes whose final step succeeds.
pub fn evaluate(
    env: &mut dyn GoalEnv,
    agent: &dyn Agent,
    env_seeds: &[u64],
    rng: &mut dyn RngCore,
) -> Result<f64, TrainError> {
    let delta = env.spec().delta;
    let mut hits = 0usize;
    for &seed in env_seeds {
        let ep = rollout(env, agent, seed, ActMode::Greedy, rng)?;
        let last = ep.transitions().last().unwrap();
        if is_success(&last.next_obs.achieved_goal, &last.next_obs.desired_goal, delta) {
            hits += 1;
        }
    }
    Ok(hits as f64 / env_seeds.len() as f64)
}

pub struct SeedRun {
    pub seed: u64,
    pub reports: Vec<EpochReport>,
    pub agent: Box<dyn Agent>,
}

/// Trains one seed in memory. `on_epoch` sees each report as it is made.
pub fn train_seed(
    cfg: &RunConfig,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<SeedRun, TrainError> {
    cfg.validate()?;
    let make = || cfg.env.make().ok_or_else(|| TrainError::Config(format!("{} is not a continuous env", cfg.env)));
    train_seed_on(cfg, seed, make()?, make()?, on_epoch)
}

/// [`train_seed`] on caller-supplied environments; `cfg.env` is ignored.
pub fn train_seed_on(
    cfg: &RunConfig,
    seed: u64,
    mut train_env: Box<dyn GoalEnv>,
    mut eval_env: Box<dyn GoalEnv>,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<SeedRun, TrainError> {
    if train_env.spec() != eval_env.spec() {
        return Err(TrainError::Config("training and evaluation envs differ".into()));
    }
    let spec = train_env.spec().clone();
    let mut rngs = Streams::new(seed);
    let mut agent = build_agent(cfg.agent, &spec, &cfg.sac(), &cfg.ddpg(), cfg.normalize, &mut rngs.init)?;
    let mut buffer = ReplayBuffer::new(cfg.replay(spec.horizon, spec.delta));
    let mut reports = Vec::with_capacity(cfg.epochs);
    let mut episodes_seen = 0;

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut train_hits = 0usize;
        for _ in 0..cfg.episodes_per_epoch {
            let env_seed = rngs.train_env_seed();
            let ep = rollout(train_env.as_mut(), agent.as_ref(), env_seed, ActMode::Explore, &mut rngs.act)?;
            if ep.final_success(spec.delta) {
                train_hits += 1;
            }
            agent.observe_episode(&ep);
            buffer.store_episode(ep)?;
            episodes_seen += 1;
        }

        let (mut mean_q, mut entropy) = (0.0, 0.0);
        for _ in 0..cfg.updates_per_epoch {
            let d = agent.update(&mut buffer, &mut rngs.update)?;
            mean_q += d.mean_q;
            entropy += d.entropy;
        }
        let n = cfg.updates_per_epoch as f64;

        let eval_seeds: Vec<u64> = (0..cfg.eval_episodes).map(|_| rngs.eval_env_seed()).collect();
        let s_test = evaluate(eval_env.as_mut(), agent.as_ref(), &eval_seeds, &mut rngs.eval_act)?;
        let s_train = train_hits as f64 / cfg.episodes_per_epoch as f64;
        let report = EpochReport {
            epoch,
            episodes_seen,
            s_train,
            s_test,
            delta_s: super::delta_s(s_train, s_test)?,
            mean_q: mean_q / n,
            policy_entropy: entropy / n,
            wall_s: if cfg.record_wall_time { start.elapsed().as_secs_f64() } else { 0.0 },
        };
        log::info!(
            "seed {seed} epoch {epoch}: s_train {:.3} s_test {:.3} mean_q {:.3}",
            report.s_train,
            report.s_test,
            report.mean_q
        );
        on_epoch(&report);
        reports.push(report);
    }
    Ok(SeedRun { seed, reports, agent })
}

pub(crate) const MANIFEST_NOTE: &str =
    "# s_train is the per-epoch fraction of stochastic training rollouts whose final step succeeds\n";

fn write_seed_outputs(dir: &Path, cfg: &RunConfig, run: &SeedRun) -> Result<(), TrainError> {
    write_progress_csv(&dir.join("progress.csv"), &run.reports)?;
    std::fs::write(dir.join("manifest.txt"), format!("{MANIFEST_NOTE}{}", cfg.manifest(Some(run.seed))))?;
    run.agent.to_checkpoint().save(&dir.join("final.ckpt"))?;
    Ok(())
}

/// Trains every seed in `cfg.seeds`, writing `seed_<n>/progress.csv`,
/// `seed_<n>/manifest.txt`, `seed_<n>/final.ckpt` and a cross-seed
/// `summary.csv` under `cfg.out_dir`.
pub fn run_training(cfg: &RunConfig) -> Result<Vec<SeedRun>, TrainError> {
    cfg.validate()?;
    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let dir = cfg.out_dir.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&dir)?;
        let run = train_seed(cfg, seed, &mut |_| {})?;
        write_seed_outputs(&dir, cfg, &run)?;
        runs.push(run);
    }
    let per_seed: Vec<&[EpochReport]> = runs.iter().map(|r| r.reports.as_slice()).collect();
    write_summary_csv(&cfg.out_dir.join("summary.csv"), &aggregate_epochs(&per_seed))?;
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{compare_agents, sweep_alpha};

    fn tiny(out: &Path) -> RunConfig {
        RunConfig {
            epochs: 2,
            episodes_per_epoch: 2,
            updates_per_epoch: 3,
            eval_episodes: 2,
            batch_size: 16,
            hidden: vec![8],
            seeds: vec![4],
            out_dir: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    fn read(path: std::path::PathBuf) -> Vec<u8> {
        std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    }


    #[test]
    fn zero_epochs_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            epochs: 0,
            ..tiny(dir.path())
        };
        let runs = run_training(&cfg).unwrap();
        assert!(runs[0].reports.is_empty());
        let csv = String::from_utf8(read(dir.path().join("seed_4/progress.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn one_row_per_epoch_with_valid_rates() {
        let dir = tempfile::tempdir().unwrap();
        let runs = run_training(&tiny(dir.path())).unwrap();
        let r = &runs[0].reports;
        assert_eq!(r.len(), 2);
        assert_eq!(r.iter().map(|e| e.episodes_seen).collect::<Vec<_>>(), [2, 4]);
        for e in r {
            assert!((0.0..=1.0).contains(&e.s_train) && (0.0..=1.0).contains(&e.s_test));
            assert_eq!(e.delta_s, (e.s_train - e.s_test).abs());
            assert!(e.mean_q.is_finite() && e.policy_entropy.is_finite());
        }
        let back = crate::trainer::read_progress_csv(&dir.path().join("seed_4/progress.csv")).unwrap();
        assert_eq!(&back, r);
        let manifest = String::from_utf8(read(dir.path().join("seed_4/manifest.txt"))).unwrap();
        assert!(manifest.contains("seed=4") && manifest.contains("agent=sher"));
        let ckpt = crate::agents::Checkpoint::load(&dir.path().join("seed_4/final.ckpt")).unwrap();
        assert_eq!(ckpt.kind, "sher");
    }

    #[test]
    fn same_seed_gives_identical_outputs() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for agent in [crate::agents::AgentKind::Sher, crate::agents::AgentKind::HerDdpg] {
            for d in [&a, &b] {
                run_training(&RunConfig { agent, ..tiny(d.path()) }).unwrap();
            }
            for f in ["seed_4/progress.csv", "seed_4/manifest.txt", "seed_4/final.ckpt", "summary.csv"] {
                assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{agent} {f}");
            }
        }
        let c = tempfile::tempdir().unwrap();
        run_training(&RunConfig {
            seeds: vec![5],
            ..tiny(c.path())
        })
        .unwrap();
        assert_ne!(read(a.path().join("seed_4/final.ckpt")), read(c.path().join("seed_5/final.ckpt")));
    }

    #[test]
    fn single_temperature_sweep_matches_plain_run() {
        let (plain, swept) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_training(&tiny(plain.path())).unwrap();
        let sweep = sweep_alpha(&tiny(swept.path()), &[0.05]).unwrap();
        assert!(!sweep.flagged);
        let sub = swept.path().join("alpha_0.05");
        for f in ["seed_4/progress.csv", "seed_4/manifest.txt", "seed_4/final.ckpt"] {
            assert_eq!(read(plain.path().join(f)), read(sub.join(f)), "{f}");
        }
        assert!(swept.path().join("alpha_comparison.csv").exists());
        assert!(sweep_alpha(&tiny(swept.path()), &[]).is_err());
        assert!(sweep_alpha(&tiny(swept.path()), &[0.1, -1.0]).is_err());
    }

    #[test]
    fn comparison_has_two_rows_for_one_epoch() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            epochs: 1,
            ..tiny(dir.path())
        };
        let cmp = compare_agents(&cfg).unwrap();
        assert_eq!(cmp.agents.len(), 2);
        let csv = String::from_utf8(read(dir.path().join("comparison.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(cmp.table.starts_with("Mean δS values\nMethod"));
        assert!(dir.path().join("her-ddpg/seed_4/progress.csv").exists());
        assert!(dir.path().join("sher/seed_4/progress.csv").exists());
    }

    #[test]
    fn evaluation_and_training_goals_are_disjoint() {
        let mut s = Streams::new(0);
        for _ in 0..100 {
            assert_eq!(s.train_env_seed() % 2, 0);
            assert_eq!(s.eval_env_seed() % 2, 1);
        }
    }
}
