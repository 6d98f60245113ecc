//! Episode-structured replay with hindsight goal relabelling.
//!
//! Episodes are stored whole. Relabelling happens when a minibatch is
//! drawn: each sampled transition has its desired goal replaced with
//! probability `k / (k + 1)` by a goal chosen from achieved goals according
//! to the configured [`RelabelStrategy`], and its reward is recomputed for
//! the substituted goal. Stored data is never modified.

mod dump;

pub use dump::{dump_csv, load_csv};

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::envs::{compute_reward, EnvError, GoalObservation};

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: GoalObservation,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_obs: GoalObservation,
    pub done: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelabelStrategy {
    /// Goal achieved at the end of the episode.
    Final,
    /// Goal achieved at a uniformly chosen later step of the same episode.
    Future,
    /// Goal achieved at any step of the same episode.
    Episode,
    /// Goal achieved anywhere in the buffer.
    Random,
    /// No relabelling.
    None,
}

impl RelabelStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            RelabelStrategy::Final => "final",
            RelabelStrategy::Future => "future",
            RelabelStrategy::Episode => "episode",
            RelabelStrategy::Random => "random",
            RelabelStrategy::None => "none",
        }
    }
}

impl fmt::Display for RelabelStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelabelStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "final" => Ok(Self::Final),
            "future" => Ok(Self::Future),
            "episode" => Ok(Self::Episode),
            "random" => Ok(Self::Random),
            "none" => Ok(Self::None),
            other => Err(format!(
                "unknown relabel strategy '{other}' (expected final, future, episode, random or none)"
            )),
        }
    }
}

/// Which achieved goal a recomputed reward is judged on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RewardRule {
    /// `r = reward(achieved(s_{t+1}), g')`, matching the environment.
    #[default]
    NextState,
    /// `r = reward(achieved(s_t), g')`.
    CurrentState,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("episode has {actual} transitions, buffer expects horizon {expected}")]
    WrongLength { expected: usize, actual: usize },
    #[error("episode chain broken at step {step}: {reason}")]
    BrokenChain { step: usize, reason: &'static str },
    #[error("stored reward at step {step} is {stored}, recomputation gives {recomputed}")]
    RewardMismatch { step: usize, stored: f64, recomputed: f64 },
    #[error("step index {t} outside episode of length {horizon}")]
    StepOutOfRange { t: usize, horizon: usize },
    #[error("cannot sample from an empty buffer")]
    Empty,
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("buffer snapshot: {0}")]
    Snapshot(String),
}

/// One complete fixed-horizon episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    transitions: Vec<Transition>,
    // achieved goals of s_0 .. s_T
    achieved: Vec<Vec<f64>>,
}

impl EpisodeRecord {
    /// Checks that consecutive transitions chain and that each transition
    /// keeps a single desired goal.
    pub fn new(transitions: Vec<Transition>) -> Result<Self, ReplayError> {
        if transitions.is_empty() {
            return Err(ReplayError::WrongLength { expected: 1, actual: 0 });
        }
        for (i, tr) in transitions.iter().enumerate() {
            if tr.obs.desired_goal != tr.next_obs.desired_goal {
                return Err(ReplayError::BrokenChain {
                    step: i,
                    reason: "desired goal differs between obs and next_obs",
                });
            }
            if !tr.obs.is_valid() || !tr.next_obs.is_valid() {
                return Err(ReplayError::BrokenChain {
                    step: i,
                    reason: "invalid observation",
                });
            }
            if let Some(next) = transitions.get(i + 1) {
                if tr.next_obs != next.obs {
                    return Err(ReplayError::BrokenChain {
                        step: i,
                        reason: "next_obs does not match the following obs",
                    });
                }
            }
        }
        let mut achieved = Vec::with_capacity(transitions.len() + 1);
        achieved.push(transitions[0].obs.achieved_goal.clone());
        achieved.extend(transitions.iter().map(|t| t.next_obs.achieved_goal.clone()));
        Ok(Self { transitions, achieved })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Achieved goal of state `s_j`, `0 <= j <= T`.
    pub fn achieved(&self, j: usize) -> &[f64] {
        &self.achieved[j]
    }

    pub fn achieved_trace(&self) -> &[Vec<f64>] {
        &self.achieved
    }

    /// Whether the final state achieves the episode's desired goal.
    pub fn final_success(&self, delta: f64) -> bool {
        let last = self.transitions.last().unwrap();
        crate::envs::is_success(&last.next_obs.achieved_goal, &last.next_obs.desired_goal, delta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayConfig {
    /// Capacity in episodes.
    pub capacity: usize,
    pub horizon: usize,
    pub strategy: RelabelStrategy,
    /// Relabelled-to-original ratio; relabel probability is `k / (k + 1)`.
    pub k: f64,
    pub delta: f64,
    pub reward_rule: RewardRule,
}

/// A sampled minibatch. `weights` start at 1 and may be changed by a
/// [`BufferOptimizer`].
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub transitions: Vec<Transition>,
    pub weights: Vec<f64>,
    pub relabelled: Vec<bool>,
    /// `(episode slot, t)` of each sample, oldest stored episode is slot 0.
    pub origin: Vec<(usize, usize)>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Plug-in point for replay prioritisation schemes.
pub trait BufferOptimizer: Send {
    fn adjust(&mut self, buffer: &ReplayBuffer, batch: Batch) -> Batch;
}

/// Leaves batches unchanged.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityOptimizer;

impl BufferOptimizer for IdentityOptimizer {
    fn adjust(&mut self, _buffer: &ReplayBuffer, batch: Batch) -> Batch {
        batch
    }
}

pub struct ReplayBuffer {
    cfg: ReplayConfig,
    episodes: VecDeque<EpisodeRecord>,
    optimizer: Box<dyn BufferOptimizer>,
    stored_total: u64,
    random_fallbacks: u64,
}

impl fmt::Debug for ReplayBuffer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ReplayBuffer")
            .field("cfg", &self.cfg)
            .field("episodes", &self.episodes.len())
            .field("stored_total", &self.stored_total)
            .finish()
    }
}

impl ReplayBuffer {
    pub fn new(cfg: ReplayConfig) -> Self {
        Self::with_optimizer(cfg, Box::new(IdentityOptimizer))
    }

    pub fn with_optimizer(cfg: ReplayConfig, optimizer: Box<dyn BufferOptimizer>) -> Self {
        assert!(cfg.capacity > 0, "replay capacity must be positive");
        Self {
            episodes: VecDeque::with_capacity(cfg.capacity.min(4096)),
            cfg,
            optimizer,
            stored_total: 0,
            random_fallbacks: 0,
        }
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.cfg
    }

    /// Stored episodes, oldest first.
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }

    pub fn episode(&self, slot: usize) -> Option<&EpisodeRecord> {
        self.episodes.get(slot)
    }

    pub fn stored_total(&self) -> u64 {
        self.stored_total
    }

    /// How often the `random` strategy had to fall back to `episode`.
    pub fn random_fallbacks(&self) -> u64 {
        self.random_fallbacks
    }

    /// Appends an episode, evicting the oldest when over capacity.
    pub fn store_episode(&mut self, episode: EpisodeRecord) -> Result<(), ReplayError> {
        if episode.len() != self.cfg.horizon {
            return Err(ReplayError::WrongLength {
                expected: self.cfg.horizon,
                actual: episode.len(),
            });
        }
        for (step, tr) in episode.transitions.iter().enumerate() {
            let recomputed = compute_reward(&tr.next_obs.achieved_goal, &tr.obs.desired_goal, self.cfg.delta)?;
            if recomputed != tr.reward {
                return Err(ReplayError::RewardMismatch {
                    step,
                    stored: tr.reward,
                    recomputed,
                });
            }
        }
        if self.episodes.len() == self.cfg.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
        self.stored_total += 1;
        Ok(())
    }

    /// Picks a substitute goal for step `t` of `episode`.
    pub fn relabel_goal<R: Rng + ?Sized>(
        &self,
        episode: &EpisodeRecord,
        t: usize,
        strategy: RelabelStrategy,
        rng: &mut R,
    ) -> Result<Vec<f64>, ReplayError> {
        let horizon = episode.len();
        if t >= horizon {
            return Err(ReplayError::StepOutOfRange { t, horizon });
        }
        Ok(self.pick_goal(episode, t, strategy, rng).to_vec())
    }

    fn pick_goal<'a, R: Rng + ?Sized>(
        &'a self,
        episode: &'a EpisodeRecord,
        t: usize,
        strategy: RelabelStrategy,
        rng: &mut R,
    ) -> &'a [f64] {
        let horizon = episode.len();
        match strategy {
            RelabelStrategy::Final => episode.achieved(horizon),
            RelabelStrategy::Future => episode.achieved(rng.random_range(t + 1..=horizon)),
            RelabelStrategy::Episode => episode.achieved(rng.random_range(1..=horizon)),
            RelabelStrategy::Random => {
                if self.episodes.is_empty() {
                    log::debug!("random relabelling on an empty buffer, using the episode strategy");
                    episode.achieved(rng.random_range(1..=horizon))
                } else {
                    let ep = &self.episodes[rng.random_range(0..self.episodes.len())];
                    ep.achieved(rng.random_range(1..=ep.len()))
                }
            }
            RelabelStrategy::None => &episode.transitions[t].obs.desired_goal,
        }
    }

    fn reward_for(&self, tr: &Transition, goal: &[f64]) -> Result<f64, EnvError> {
        let achieved = match self.cfg.reward_rule {
            RewardRule::NextState => &tr.next_obs.achieved_goal,
            RewardRule::CurrentState => &tr.obs.achieved_goal,
        };
        compute_reward(achieved, goal, self.cfg.delta)
    }

    /// Draws `batch_size` transitions uniformly over (episode, step) with
    /// relabelling, without passing through the buffer optimizer.
    pub fn sample_raw<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Batch, ReplayError> {
        if batch_size == 0 {
            return Err(ReplayError::ZeroBatch);
        }
        if self.episodes.is_empty() {
            return Err(ReplayError::Empty);
        }
        let relabel_p = if self.cfg.strategy == RelabelStrategy::None {
            0.0
        } else {
            self.cfg.k / (self.cfg.k + 1.0)
        };
        let mut batch = Batch {
            transitions: Vec::with_capacity(batch_size),
            weights: vec![1.0; batch_size],
            relabelled: Vec::with_capacity(batch_size),
            origin: Vec::with_capacity(batch_size),
        };
        for _ in 0..batch_size {
            let slot = rng.random_range(0..self.episodes.len());
            let ep = &self.episodes[slot];
            let t = rng.random_range(0..ep.len());
            let stored = &ep.transitions[t];
            let relabel = relabel_p > 0.0 && rng.random::<f64>() < relabel_p;
            let mut tr = stored.clone();
            if relabel {
                let goal = self.pick_goal(ep, t, self.cfg.strategy, rng).to_vec();
                tr.obs.desired_goal.clone_from(&goal);
                tr.next_obs.desired_goal = goal;
            }
            tr.reward = self.reward_for(&tr, &tr.obs.desired_goal)?;
            batch.transitions.push(tr);
            batch.relabelled.push(relabel);
            batch.origin.push((slot, t));
        }
        Ok(batch)
    }

    /// Samples a minibatch and passes it through the buffer optimizer.
    pub fn sample_minibatch<R: Rng + ?Sized>(&mut self, batch_size: usize, rng: &mut R) -> Result<Batch, ReplayError> {
        let batch = self.sample_raw(batch_size, rng)?;
        let mut hook = std::mem::replace(&mut self.optimizer, Box::new(IdentityOptimizer));
        let batch = hook.adjust(self, batch);
        self.optimizer = hook;
        Ok(batch)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Straight-line episode along x with achieved goals `s_j = (j * step, 0)`.
    pub fn line_episode(horizon: usize, step: f64, goal: [f64; 2], delta: f64) -> EpisodeRecord {
        let obs_at = |j: usize| GoalObservation {
            observation: vec![j as f64 * step, 0.0],
            achieved_goal: vec![j as f64 * step, 0.0],
            desired_goal: goal.to_vec(),
        };
        let transitions = (0..horizon)
            .map(|t| {
                let next = obs_at(t + 1);
                Transition {
                    reward: compute_reward(&next.achieved_goal, &goal, delta).unwrap(),
                    obs: obs_at(t),
                    action: vec![1.0, 0.0],
                    next_obs: next,
                    done: t + 1 == horizon,
                }
            })
            .collect();
        EpisodeRecord::new(transitions).unwrap()
    }

    pub fn config(horizon: usize, strategy: RelabelStrategy, k: f64) -> ReplayConfig {
        ReplayConfig {
            capacity: 10,
            horizon,
            strategy,
            k,
            delta: 0.05,
            reward_rule: RewardRule::NextState,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn store_and_evict_fifo() {
        let mut buf = ReplayBuffer::new(config(5, RelabelStrategy::Future, 4.0));
        buf.store_episode(line_episode(5, 0.1, [9.0, 0.0], 0.05)).unwrap();
        assert_eq!(buf.len(), 1);
        for i in 1..=10 {
            buf.store_episode(line_episode(5, 0.1 * (i + 1) as f64, [9.0, 0.0], 0.05)).unwrap();
        }
        assert_eq!(buf.len(), 10);
        // the step-0.1 episode was the first stored and is gone
        assert!((buf.episode(0).unwrap().achieved(1)[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_episodes() {
        let mut buf = ReplayBuffer::new(config(5, RelabelStrategy::Future, 4.0));
        let short = line_episode(4, 0.1, [1.0, 0.0], 0.05);
        assert!(matches!(buf.store_episode(short), Err(ReplayError::WrongLength { .. })));

        let mut trs = line_episode(5, 0.1, [1.0, 0.0], 0.05).transitions().to_vec();
        trs[2].next_obs.observation[0] += 1.0;
        assert!(matches!(EpisodeRecord::new(trs), Err(ReplayError::BrokenChain { step: 2, .. })));

        let mut trs = line_episode(5, 0.1, [1.0, 0.0], 0.05).transitions().to_vec();
        trs[1].reward = 0.0;
        let ep = EpisodeRecord::new(trs).unwrap();
        assert!(matches!(buf.store_episode(ep), Err(ReplayError::RewardMismatch { step: 1, .. })));
    }

    #[test]
    fn stored_rewards_are_rederivable() {
        let mut buf = ReplayBuffer::new(config(20, RelabelStrategy::Future, 4.0));
        buf.store_episode(line_episode(20, 0.05, [0.5, 0.0], 0.05)).unwrap();
        for ep in buf.episodes() {
            for tr in ep.transitions() {
                let r = compute_reward(&tr.next_obs.achieved_goal, &tr.obs.desired_goal, 0.05).unwrap();
                assert_eq!(r, tr.reward);
            }
        }
    }

    #[test]
    fn final_and_forced_future_goals() {
        let buf = ReplayBuffer::new(config(6, RelabelStrategy::Final, 4.0));
        let ep = line_episode(6, 0.1, [9.0, 0.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in 0..6 {
            let g = buf.relabel_goal(&ep, t, RelabelStrategy::Final, &mut rng).unwrap();
            assert_eq!(g, ep.achieved(6));
        }
        for _ in 0..20 {
            let g = buf.relabel_goal(&ep, 5, RelabelStrategy::Future, &mut rng).unwrap();
            assert_eq!(g, ep.achieved(6));
        }
        assert!(buf.relabel_goal(&ep, 6, RelabelStrategy::Final, &mut rng).is_err());
    }

    #[test]
    fn future_candidates_enumerated() {
        // T = 3, t = 1: candidates are s_2 and s_3, each about half the time
        let buf = ReplayBuffer::new(config(3, RelabelStrategy::Future, 4.0));
        let ep = line_episode(3, 1.0, [9.0, 0.0], 0.05);
        let mut counts = BTreeMap::new();
        for seed in 0..4000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = buf.relabel_goal(&ep, 1, RelabelStrategy::Future, &mut rng).unwrap();
            *counts.entry(g[0] as i64).or_insert(0usize) += 1;
        }
        assert_eq!(counts.keys().copied().collect::<Vec<_>>(), vec![2, 3]);
        for &c in counts.values() {
            assert!((c as f64 / 4000.0 - 0.5).abs() < 0.03, "{counts:?}");
        }
    }

    #[test]
    fn episode_and_random_strategies_cover_their_support() {
        let mut buf = ReplayBuffer::new(config(4, RelabelStrategy::Random, 4.0));
        let ep = line_episode(4, 1.0, [9.0, 0.0], 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // empty buffer: random behaves like episode
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..400 {
            let g = buf.relabel_goal(&ep, 0, RelabelStrategy::Random, &mut rng).unwrap();
            seen.insert(g[0] as i64);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(buf.random_fallbacks(), 0);

        buf.store_episode(line_episode(4, 10.0, [90.0, 0.0], 0.05)).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..400 {
            let g = buf.relabel_goal(&ep, 3, RelabelStrategy::Random, &mut rng).unwrap();
            seen.insert(g[0] as i64);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![10, 20, 30, 40]);
    }

    #[test]
    fn relabel_fraction_matches_ratio() {
        let mut buf = ReplayBuffer::new(config(10, RelabelStrategy::Future, 4.0));
        buf.store_episode(line_episode(10, 0.1, [3.0, 3.0], 0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = buf.sample_minibatch(100_000, &mut rng).unwrap();
        let frac = batch.relabelled.iter().filter(|&&r| r).count() as f64 / 1e5;
        assert!((frac - 0.8).abs() < 0.02, "{frac}");
    }

    #[test]
    fn zero_ratio_never_relabels() {
        let mut buf = ReplayBuffer::new(config(10, RelabelStrategy::Future, 0.0));
        buf.store_episode(line_episode(10, 0.1, [3.0, 3.0], 0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = buf.sample_minibatch(500, &mut rng).unwrap();
        assert!(batch.relabelled.iter().all(|r| !r));
        assert!(batch.transitions.iter().all(|t| t.obs.desired_goal == vec![3.0, 3.0]));
    }

    #[test]
    fn huge_ratio_final_relabels_everything() {
        let mut buf = ReplayBuffer::new(config(10, RelabelStrategy::Final, 1e6));
        buf.store_episode(line_episode(10, 0.02, [3.0, 3.0], 0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = buf.sample_minibatch(2000, &mut rng).unwrap();
        let frac = batch.relabelled.iter().filter(|&&r| r).count() as f64 / 2000.0;
        assert!(frac > 0.998);
        let final_goal = buf.episode(0).unwrap().achieved(10).to_vec();
        for (tr, &rel) in batch.transitions.iter().zip(&batch.relabelled) {
            if rel {
                assert_eq!(tr.obs.desired_goal, final_goal);
                let r = compute_reward(&tr.next_obs.achieved_goal, &final_goal, 0.05).unwrap();
                assert_eq!(tr.reward, r);
            }
        }
    }

    #[test]
    fn sampling_errors() {
        let mut buf = ReplayBuffer::new(config(3, RelabelStrategy::Future, 4.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample_minibatch(4, &mut rng), Err(ReplayError::Empty)));
        buf.store_episode(line_episode(3, 0.1, [1.0, 0.0], 0.05)).unwrap();
        assert!(matches!(buf.sample_minibatch(0, &mut rng), Err(ReplayError::ZeroBatch)));
    }

    #[test]
    fn current_state_reward_rule() {
        let mut cfg = config(4, RelabelStrategy::Final, 1e6);
        cfg.reward_rule = RewardRule::CurrentState;
        let mut buf = ReplayBuffer::new(cfg);
        buf.store_episode(line_episode(4, 1.0, [9.0, 0.0], 0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let batch = buf.sample_minibatch(200, &mut rng).unwrap();
        for (tr, &(_, t)) in batch.transitions.iter().zip(&batch.origin) {
            // judged on s_t, so only the impossible t = 4 would succeed
            assert_eq!(tr.reward, -1.0, "t = {t}");
        }
    }

    struct Halve;
    impl BufferOptimizer for Halve {
        fn adjust(&mut self, _buffer: &ReplayBuffer, mut batch: Batch) -> Batch {
            batch.weights.iter_mut().for_each(|w| *w *= 0.5);
            batch
        }
    }

    #[test]
    fn optimizer_hook_reweights() {
        let mut buf = ReplayBuffer::with_optimizer(config(3, RelabelStrategy::Future, 4.0), Box::new(Halve));
        buf.store_episode(line_episode(3, 0.1, [1.0, 0.0], 0.05)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = buf.sample_minibatch(8, &mut rng).unwrap();
        assert!(batch.weights.iter().all(|&w| w == 0.5));
        // the hook is restored after use
        let batch = buf.sample_minibatch(8, &mut rng).unwrap();
        assert!(batch.weights.iter().all(|&w| w == 0.5));
    }

    proptest! {
        #[test]
        fn relabelling_only_touches_goals_and_rewards(
            seed in 0u64..1000,
            strategy in prop::sample::select(vec![
                RelabelStrategy::Final, RelabelStrategy::Future,
                RelabelStrategy::Episode, RelabelStrategy::Random,
            ]),
        ) {
            let mut buf = ReplayBuffer::new(config(8, strategy, 4.0));
            buf.store_episode(line_episode(8, 0.013, [0.05, 0.0], 0.05)).unwrap();
            buf.store_episode(line_episode(8, 0.021, [0.3, 0.1], 0.05)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let batch = buf.sample_minibatch(64, &mut rng).unwrap();
            for (tr, &(slot, t)) in batch.transitions.iter().zip(&batch.origin) {
                let stored = &buf.episode(slot).unwrap().transitions()[t];
                prop_assert_eq!(&tr.action, &stored.action);
                prop_assert_eq!(&tr.obs.observation, &stored.obs.observation);
                prop_assert_eq!(&tr.obs.achieved_goal, &stored.obs.achieved_goal);
                prop_assert_eq!(&tr.next_obs.achieved_goal, &stored.next_obs.achieved_goal);
                prop_assert_eq!(&tr.obs.desired_goal, &tr.next_obs.desired_goal);
                let r = compute_reward(&tr.next_obs.achieved_goal, &tr.obs.desired_goal, 0.05).unwrap();
                prop_assert_eq!(tr.reward, r);
            }
        }
    }
}
