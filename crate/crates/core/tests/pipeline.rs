use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sher_core::agents::{agent_from_checkpoint, ActMode, AgentKind, Checkpoint};
use sher_core::envs::EnvKind;
use sher_core::replay::{dump_csv, load_csv, RelabelStrategy, ReplayBuffer, ReplayConfig, RewardRule};
use sher_core::trainer::{evaluate, read_progress_csv, rollout, run_training, train_seed, RunConfig};

fn short(env: EnvKind, agent: AgentKind, dir: &std::path::Path) -> RunConfig {
    RunConfig {
        env,
        agent,
        epochs: 2,
        episodes_per_epoch: 4,
        updates_per_epoch: 5,
        eval_episodes: 4,
        seeds: vec![1],
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    }
}

#[test]
fn checkpoint_restores_the_greedy_policy() {
    let dir = tempfile::tempdir().unwrap();
    for agent in [AgentKind::Sher, AgentKind::HerDdpg] {
        let cfg = short(EnvKind::PointPush, agent, dir.path());
        let run = train_seed(&cfg, 1, &mut |_| {}).unwrap();
        let path = dir.path().join(format!("{agent}.ckpt"));
        run.agent.to_checkpoint().save(&path).unwrap();
        let restored = agent_from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
        assert_eq!(restored.kind(), agent);

        let mut env = EnvKind::PointPush.make().unwrap();
        let seeds = [1, 3, 5, 7];
        let a = evaluate(env.as_mut(), run.agent.as_ref(), &seeds, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let b = evaluate(env.as_mut(), restored.as_ref(), &seeds, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(a, b);
        let obs = env.reset(9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            run.agent.act(&obs, ActMode::Greedy, &mut rng).unwrap(),
            restored.act(&obs, ActMode::Greedy, &mut rng).unwrap()
        );
    }
}

#[test]
fn run_outputs_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(EnvKind::PointReach, AgentKind::Sher, dir.path());
    let runs = run_training(&cfg).unwrap();
    let seed_dir = dir.path().join("seed_1");
    let reports = read_progress_csv(&seed_dir.join("progress.csv")).unwrap();
    assert_eq!(reports, runs[0].reports);
    assert!(Checkpoint::load(&seed_dir.join("final.ckpt")).is_ok());

    let mut back = RunConfig::default();
    back.apply_file(&seed_dir.join("manifest.txt")).unwrap();
    back.out_dir = cfg.out_dir.clone();
    back.seeds = cfg.seeds.clone();
    assert_eq!(back, cfg);
}

#[test]
fn rollouts_survive_a_replay_dump() {
    let mut env = EnvKind::PointPush.make().unwrap();
    let spec = env.spec().clone();
    let dir = tempfile::tempdir().unwrap();
    let cfg = short(EnvKind::PointPush, AgentKind::HerDdpg, dir.path());
    let agent = train_seed(&cfg, 1, &mut |_| {}).unwrap().agent;
    let rc = ReplayConfig {
        capacity: 8,
        horizon: spec.horizon,
        strategy: RelabelStrategy::Future,
        k: 4.0,
        delta: spec.delta,
        reward_rule: RewardRule::NextState,
    };
    let mut buf = ReplayBuffer::new(rc.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in 0..5 {
        buf.store_episode(rollout(env.as_mut(), agent.as_ref(), 2 * s, ActMode::Explore, &mut rng).unwrap()).unwrap();
    }
    let path = dir.path().join("replay.csv");
    dump_csv(&buf, &path).unwrap();
    let mut back = ReplayBuffer::new(rc);
    assert_eq!(load_csv(&mut back, &path).unwrap(), 5);
    assert!(back.episodes().eq(buf.episodes()));
}
