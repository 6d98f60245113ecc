//! Goal-conditioned environments with sparse binary rewards.
//!
//! A step earns `0` when the achieved goal lies strictly within `delta`
//! (Euclidean) of the desired goal and `-1` otherwise. Episodes run for a
//! fixed horizon; reaching the goal does not end them.

mod point;
mod tabular;

pub use point::{PointPush, PointPushConfig, PointReach, PointReachConfig};
pub use tabular::{GridAction, TabularGoalMDP};

use std::fmt;
use std::str::FromStr;

/// Observation, achieved goal and desired goal at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalObservation {
    pub observation: Vec<f64>,
    pub achieved_goal: Vec<f64>,
    pub desired_goal: Vec<f64>,
}

impl GoalObservation {
    pub fn is_valid(&self) -> bool {
        self.achieved_goal.len() == self.desired_goal.len()
            && self
                .observation
                .iter()
                .chain(&self.achieved_goal)
                .chain(&self.desired_goal)
                .all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    /// Episode length `T`.
    pub horizon: usize,
    /// Success threshold in goal-space distance units.
    pub delta: f64,
}

impl EnvSpec {
    /// Actions live in the symmetric box `[-ACTION_BOUND, ACTION_BOUND]`.
    pub const ACTION_BOUND: f64 = 1.0;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("goal dimension mismatch: achieved has {achieved}, desired has {desired}")]
    GoalDimMismatch { achieved: usize, desired: usize },
    #[error("action has {actual} components, environment expects {expected}")]
    ActionDimMismatch { expected: usize, actual: usize },
    #[error("step called after the episode finished (horizon {horizon})")]
    EpisodeFinished { horizon: usize },
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
}

/// Sparse reward: `0` iff `|achieved - desired| < delta`, else `-1`.
pub fn compute_reward(achieved: &[f64], desired: &[f64], delta: f64) -> Result<f64, EnvError> {
    if achieved.len() != desired.len() {
        return Err(EnvError::GoalDimMismatch {
            achieved: achieved.len(),
            desired: desired.len(),
        });
    }
    let dist = goal_distance(achieved, desired);
    Ok(if dist < delta { 0.0 } else { -1.0 })
}

pub fn is_success(achieved: &[f64], desired: &[f64], delta: f64) -> bool {
    matches!(compute_reward(achieved, desired, delta), Ok(r) if r == 0.0)
}

pub fn goal_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: GoalObservation,
    pub reward: f64,
    pub done: bool,
}

/// Continuous goal-conditioned environment.
pub trait GoalEnv: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a fresh episode; deterministic in `seed`.
    fn reset(&mut self, seed: u64) -> GoalObservation;

    /// Advances one step. Out-of-box actions are clipped and counted.
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    /// Number of action components clipped since construction.
    fn clipped_actions(&self) -> u64;

    fn compute_reward(&self, achieved: &[f64], desired: &[f64]) -> Result<f64, EnvError> {
        compute_reward(achieved, desired, self.spec().delta)
    }
}

/// Named continuous environments selectable from configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvKind {
    PointReach,
    PointPush,
    Grid,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::PointReach => "point-reach",
            EnvKind::PointPush => "point-push",
            EnvKind::Grid => "grid",
        }
    }

    /// Builds the continuous environment; `None` for the tabular grid.
    pub fn make(self) -> Option<Box<dyn GoalEnv>> {
        match self {
            EnvKind::PointReach => Some(Box::new(PointReach::new(PointReachConfig::default()))),
            EnvKind::PointPush => Some(Box::new(PointPush::new(PointPushConfig::default()))),
            EnvKind::Grid => None,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point-reach" => Ok(EnvKind::PointReach),
            "point-push" => Ok(EnvKind::PointPush),
            "grid" => Ok(EnvKind::Grid),
            other => Err(format!("unknown env '{other}' (expected point-reach, point-push or grid)")),
        }
    }
}
