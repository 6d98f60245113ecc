//! Planar point-mass tasks.
//!
//! The agent's action is a velocity command in `[-1, 1]^2`, scaled by
//! `max_speed` and integrated over one `dt`. Positions are clipped to the
//! square workspace `[-workspace, workspace]^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{compute_reward, EnvError, EnvSpec, GoalEnv, GoalObservation, StepResult};

fn clip_action(action: &[f64], expected: usize, clipped: &mut u64) -> Result<[f64; 2], EnvError> {
    if action.len() != expected {
        return Err(EnvError::ActionDimMismatch {
            expected,
            actual: action.len(),
        });
    }
    let mut out = [0.0; 2];
    for (o, &a) in out.iter_mut().zip(action) {
        let b = EnvSpec::ACTION_BOUND;
        // NaN is treated as out of bounds and replaced by zero
        *o = if a.is_nan() {
            *clipped += 1;
            0.0
        } else if !(-b..=b).contains(&a) {
            *clipped += 1;
            a.clamp(-b, b)
        } else {
            a
        };
    }
    Ok(out)
}

fn sample_box(rng: &mut ChaCha8Rng, half_width: f64) -> [f64; 2] {
    [
        rng.random_range(-half_width..=half_width),
        rng.random_range(-half_width..=half_width),
    ]
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointReachConfig {
    pub workspace: f64,
    /// Goals are drawn uniformly from `[-goal_range, goal_range]^2`.
    pub goal_range: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub horizon: usize,
    pub delta: f64,
}

impl Default for PointReachConfig {
    fn default() -> Self {
        Self {
            workspace: 1.0,
            goal_range: 0.5,
            max_speed: 1.0,
            dt: 0.04,
            horizon: 50,
            delta: 0.05,
        }
    }
}

/// Move a point from the origin to a sampled goal position.
///
/// Observation: `[x, y, vx, vy]`; achieved goal: `[x, y]`.
#[derive(Clone, Debug)]
pub struct PointReach {
    cfg: PointReachConfig,
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    goal: [f64; 2],
    t: usize,
    clipped: u64,
}

impl PointReach {
    pub fn new(cfg: PointReachConfig) -> Self {
        let spec = EnvSpec {
            obs_dim: 4,
            goal_dim: 2,
            action_dim: 2,
            horizon: cfg.horizon,
            delta: cfg.delta,
        };
        Self {
            cfg,
            spec,
            pos: [0.0; 2],
            vel: [0.0; 2],
            goal: [0.0; 2],
            t: 0,
            clipped: 0,
        }
    }

    pub fn config(&self) -> &PointReachConfig {
        &self.cfg
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, pos: [f64; 2], goal: [f64; 2]) -> GoalObservation {
        self.pos = pos;
        self.vel = [0.0; 2];
        self.goal = goal;
        self.t = 0;
        self.observe()
    }

    fn observe(&self) -> GoalObservation {
        GoalObservation {
            observation: vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]],
            achieved_goal: self.pos.to_vec(),
            desired_goal: self.goal.to_vec(),
        }
    }
}

impl GoalEnv for PointReach {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> GoalObservation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goal = sample_box(&mut rng, self.cfg.goal_range);
        self.reset_to([0.0; 2], goal)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.t >= self.spec.horizon {
            return Err(EnvError::EpisodeFinished {
                horizon: self.spec.horizon,
            });
        }
        let a = clip_action(action, 2, &mut self.clipped)?;
        let w = self.cfg.workspace;
        for i in 0..2 {
            self.vel[i] = a[i] * self.cfg.max_speed;
            self.pos[i] = (self.pos[i] + self.vel[i] * self.cfg.dt).clamp(-w, w);
        }
        self.t += 1;
        let obs = self.observe();
        let reward = compute_reward(&obs.achieved_goal, &obs.desired_goal, self.spec.delta)?;
        Ok(StepResult {
            obs,
            reward,
            done: self.t == self.spec.horizon,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointPushConfig {
    pub workspace: f64,
    pub goal_range: f64,
    /// The block starts at a uniform angle and a uniform distance in
    /// `[block_min_offset, block_max_offset]` from the agent.
    pub block_min_offset: f64,
    pub block_max_offset: f64,
    pub contact_radius: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub horizon: usize,
    pub delta: f64,
}

impl Default for PointPushConfig {
    fn default() -> Self {
        Self {
            workspace: 1.0,
            goal_range: 0.5,
            block_min_offset: 0.06,
            block_max_offset: 0.12,
            contact_radius: 0.1,
            max_speed: 1.0,
            dt: 0.04,
            horizon: 60,
            delta: 0.05,
        }
    }
}

/// Move a block to the goal by pushing it with the point agent.
///
/// A block within `contact_radius` of the agent at the start of a step is
/// carried: it receives the agent's displacement for that step. The block
/// never moves otherwise.
///
/// Observation: `[x, y, vx, vy, bx, by, bx - x, by - y]`; achieved goal is
/// the block position.
#[derive(Clone, Debug)]
pub struct PointPush {
    cfg: PointPushConfig,
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    block: [f64; 2],
    goal: [f64; 2],
    t: usize,
    clipped: u64,
}

impl PointPush {
    pub fn new(cfg: PointPushConfig) -> Self {
        let spec = EnvSpec {
            obs_dim: 8,
            goal_dim: 2,
            action_dim: 2,
            horizon: cfg.horizon,
            delta: cfg.delta,
        };
        Self {
            cfg,
            spec,
            pos: [0.0; 2],
            vel: [0.0; 2],
            block: [0.0; 2],
            goal: [0.0; 2],
            t: 0,
            clipped: 0,
        }
    }

    pub fn config(&self) -> &PointPushConfig {
        &self.cfg
    }

    pub fn reset_to(&mut self, pos: [f64; 2], block: [f64; 2], goal: [f64; 2]) -> GoalObservation {
        self.pos = pos;
        self.vel = [0.0; 2];
        self.block = block;
        self.goal = goal;
        self.t = 0;
        self.observe()
    }

    pub fn block(&self) -> [f64; 2] {
        self.block
    }

    pub fn agent(&self) -> [f64; 2] {
        self.pos
    }

    fn observe(&self) -> GoalObservation {
        let (p, b) = (self.pos, self.block);
        GoalObservation {
            observation: vec![p[0], p[1], self.vel[0], self.vel[1], b[0], b[1], b[0] - p[0], b[1] - p[1]],
            achieved_goal: b.to_vec(),
            desired_goal: self.goal.to_vec(),
        }
    }
}

impl GoalEnv for PointPush {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> GoalObservation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = [0.0; 2];
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radius = rng.random_range(self.cfg.block_min_offset..=self.cfg.block_max_offset);
        let block = [start[0] + radius * angle.cos(), start[1] + radius * angle.sin()];
        let goal = sample_box(&mut rng, self.cfg.goal_range);
        self.reset_to(start, block, goal)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if self.t >= self.spec.horizon {
            return Err(EnvError::EpisodeFinished {
                horizon: self.spec.horizon,
            });
        }
        let a = clip_action(action, 2, &mut self.clipped)?;
        let w = self.cfg.workspace;
        let before = self.pos;
        for i in 0..2 {
            self.vel[i] = a[i] * self.cfg.max_speed;
            self.pos[i] = (self.pos[i] + self.vel[i] * self.cfg.dt).clamp(-w, w);
        }
        // contact is judged before the move, so a touched block travels with the agent
        if dist2(before, self.block) < self.cfg.contact_radius {
            for i in 0..2 {
                self.block[i] = (self.block[i] + self.pos[i] - before[i]).clamp(-w, w);
            }
        }
        self.t += 1;
        let obs = self.observe();
        let reward = compute_reward(&obs.achieved_goal, &obs.desired_goal, self.spec.delta)?;
        Ok(StepResult {
            obs,
            reward,
            done: self.t == self.spec.horizon,
        })
    }

    fn clipped_actions(&self) -> u64 {
        self.clipped
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_is_deterministic_and_in_box() {
        let mut env = PointReach::new(PointReachConfig::default());
        let a = env.reset(7);
        let b = env.reset(7);
        assert_eq!(a, b);
        for seed in 0..200 {
            let obs = env.reset(seed);
            assert!(obs.desired_goal.iter().all(|g| g.abs() <= 0.5));
            assert!(obs.is_valid());
        }
    }

    #[test]
    fn zero_action_keeps_achieved_goal() {
        let mut env = PointReach::new(PointReachConfig::default());
        let start = env.reset(3);
        let step = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(step.obs.achieved_goal, start.achieved_goal);

        let mut push = PointPush::new(PointPushConfig::default());
        let start = push.reset(3);
        let step = push.step(&[0.0, 0.0]).unwrap();
        assert_eq!(step.obs.achieved_goal, start.achieved_goal);
    }

    #[test]
    fn sitting_on_goal_earns_zero() {
        let mut env = PointReach::new(PointReachConfig::default());
        env.reset_to([0.2, -0.1], [0.2, -0.1]);
        assert_eq!(env.step(&[0.0, 0.0]).unwrap().reward, 0.0);
    }

    #[test]
    fn straight_line_reach_succeeds_at_closed_form_step() {
        // Speed 1, dt 0.04: after n steps the distance to (1, 0) is 1 - 0.04 n,
        // first below 0.05 at n = 24.
        let mut env = PointReach::new(PointReachConfig::default());
        env.reset_to([0.0, 0.0], [1.0, 0.0]);
        let rewards: Vec<f64> = (0..30).map(|_| env.step(&[1.0, 0.0]).unwrap().reward).collect();
        let first = rewards.iter().position(|&r| r == 0.0).unwrap();
        assert_eq!(first + 1, 24);
        assert!(rewards[..first].iter().all(|&r| r == -1.0));
    }

    #[test]
    fn fixed_horizon_then_rejects() {
        let mut env = PointReach::new(PointReachConfig::default());
        env.reset(0);
        for t in 1..=50 {
            let s = env.step(&[0.3, 0.1]).unwrap();
            assert_eq!(s.done, t == 50);
        }
        assert!(matches!(env.step(&[0.0, 0.0]), Err(EnvError::EpisodeFinished { horizon: 50 })));
    }

    #[test]
    fn out_of_bounds_actions_are_clipped_and_counted() {
        let mut env = PointReach::new(PointReachConfig::default());
        env.reset_to([0.0, 0.0], [0.5, 0.5]);
        let s = env.step(&[3.0, -0.5]).unwrap();
        assert!((s.obs.observation[0] - 0.04).abs() < 1e-15);
        assert_eq!(env.clipped_actions(), 1);
        assert!(env.step(&[0.0]).is_err());
    }

    #[test]
    fn push_moves_block_only_in_contact() {
        let mut env = PointPush::new(PointPushConfig::default());
        env.reset_to([0.0, 0.0], [0.31, 0.0], [0.5, 0.0]);
        // before step n the gap is 0.31 - 0.04 (n - 1): contact from n = 7
        for n in 1..=9 {
            let before = env.block();
            env.step(&[1.0, 0.0]).unwrap();
            if n <= 6 {
                assert_eq!(env.block(), before, "step {n}");
            } else {
                assert!((env.block()[0] - before[0] - 0.04).abs() < 1e-12, "step {n}");
            }
        }
    }

    #[test]
    fn touched_block_keeps_its_offset() {
        let mut env = PointPush::new(PointPushConfig::default());
        env.reset_to([0.0, 0.0], [0.05, 0.02], [0.5, 0.0]);
        for _ in 0..3 {
            env.step(&[-1.0, 0.5]).unwrap();
        }
        let (a, b) = (env.agent(), env.block());
        assert!((b[0] - a[0] - 0.05).abs() < 1e-12 && (b[1] - a[1] - 0.02).abs() < 1e-12);
        assert!((a[0] + 0.12).abs() < 1e-12);
    }

    #[test]
    fn push_reset_respects_offsets() {
        let mut env = PointPush::new(PointPushConfig::default());
        for seed in 0..200 {
            let obs = env.reset(seed);
            let r = dist2([obs.achieved_goal[0], obs.achieved_goal[1]], [0.0, 0.0]);
            assert!((0.06..=0.12).contains(&r), "{r}");
            assert!(obs.desired_goal.iter().all(|x| x.abs() <= 0.5));
            assert_eq!(obs.observation.len(), 8);
        }
    }
}
