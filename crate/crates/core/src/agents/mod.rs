//! Learning agents: the soft actor-critic learner, the deterministic
//! DDPG baseline and a tabular soft actor-critic used against the oracle.

mod checkpoint;
mod checks;
pub mod ddpg;
pub mod discrete;
mod normalizer;
pub mod sac;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use checks::{loss_gradient_errors, synthetic_batch, LossCheck, GRAD_CHECK_STEP, KINK_MARGIN};
pub use ddpg::{DdpgAgent, DdpgConfig, DdpgParams};
pub use normalizer::{Normalizer, RunningStats};
pub use sac::{ParamSet, PolicyOutput, SacAgent, SacConfig};

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::diffcore::{DiffError, Tensor};
use crate::envs::{EnvSpec, GoalObservation};
use crate::replay::{Batch, EpisodeRecord, ReplayBuffer, ReplayError};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("non-finite {what}: {diagnostics}")]
    NonFinite { what: &'static str, diagnostics: String },
    #[error("invalid agent configuration: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AgentKind {
    Sher,
    HerDdpg,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Sher => "sher",
            AgentKind::HerDdpg => "her-ddpg",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sher" => Ok(Self::Sher),
            "her-ddpg" => Ok(Self::HerDdpg),
            other => Err(format!("unknown agent '{other}' (expected sher or her-ddpg)")),
        }
    }
}

/// Scalars reported by one update step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateDiagnostics {
    pub q_loss: f64,
    /// Zero for agents without a state-value network.
    pub v_loss: f64,
    pub pi_loss: f64,
    pub mean_q: f64,
    /// `-mean log π` over the batch; zero for deterministic policies.
    pub entropy: f64,
}

impl UpdateDiagnostics {
    fn ensure_finite(&self) -> Result<(), AgentError> {
        let all = [self.q_loss, self.v_loss, self.pi_loss, self.mean_q, self.entropy];
        if all.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(AgentError::NonFinite {
                what: "loss",
                diagnostics: format!("{self:?}"),
            })
        }
    }
}

/// A loss value and its gradient for each parameter tensor of one network.
#[derive(Clone, Debug)]
pub struct LossGrad {
    pub value: f64,
    pub grads: Vec<Tensor>,
}

/// Minibatch in network-ready form. `states` and `next_states` are the
/// normalised `obs ‖ goal` rows; the remaining columns are `B x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchTensors {
    pub states: Tensor,
    pub actions: Tensor,
    pub rewards: Tensor,
    pub next_states: Tensor,
    pub dones: Tensor,
    pub weights: Tensor,
}

impl BatchTensors {
    pub fn from_batch(batch: &Batch, norm: &Normalizer) -> Self {
        let b = batch.len();
        let ds = norm.state_dim();
        let da = batch.transitions.first().map_or(0, |t| t.action.len());
        let mut states = Vec::with_capacity(b * ds);
        let mut next_states = Vec::with_capacity(b * ds);
        let mut actions = Vec::with_capacity(b * da);
        for tr in &batch.transitions {
            norm.normalize_into(&tr.obs, &mut states);
            norm.normalize_into(&tr.next_obs, &mut next_states);
            actions.extend_from_slice(&tr.action);
        }
        Self {
            states: Tensor::matrix(b, ds, states),
            actions: Tensor::matrix(b, da, actions),
            rewards: Tensor::matrix(b, 1, batch.transitions.iter().map(|t| t.reward).collect()),
            next_states: Tensor::matrix(b, ds, next_states),
            dones: Tensor::matrix(b, 1, batch.transitions.iter().map(|t| f64::from(u8::from(t.done))).collect()),
            weights: Tensor::matrix(b, 1, batch.weights.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[states ‖ actions]`.
    pub fn state_actions(&self) -> Tensor {
        self.states.concat_cols(&self.actions)
    }
}

/// `target ← ρ target + (1 − ρ) source`, elementwise.
pub fn polyak_update(target: &mut [Tensor], source: &[Tensor], rho: f64) -> Result<(), AgentError> {
    if target.len() != source.len() || target.iter().zip(source).any(|(t, s)| !t.same_shape(s)) {
        return Err(AgentError::Diff(DiffError::ShapeMismatch {
            context: "polyak update",
            expected: format!("{:?}", target.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>()),
            actual: format!("{:?}", source.iter().map(|t| t.shape().to_vec()).collect::<Vec<_>>()),
        }));
    }
    for (t, s) in target.iter_mut().zip(source) {
        for (x, &y) in t.data_mut().iter_mut().zip(s.data()) {
            *x = rho * *x + (1.0 - rho) * y;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    /// Behaviour policy used while collecting training episodes.
    Explore,
    /// Deterministic head used for evaluation.
    Greedy,
}

/// What the trainer needs from a learner.
pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn act(&self, obs: &GoalObservation, mode: ActMode, rng: &mut dyn RngCore) -> Result<Vec<f64>, AgentError>;

    /// Feeds a stored episode to the input normaliser.
    fn observe_episode(&mut self, episode: &EpisodeRecord);

    fn update(&mut self, buffer: &mut ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateDiagnostics, AgentError>;

    fn to_checkpoint(&self) -> Checkpoint;
}

/// Builds a freshly initialised agent for an environment.
pub fn build_agent(
    kind: AgentKind,
    spec: &EnvSpec,
    sac: &SacConfig,
    ddpg: &DdpgConfig,
    normalize: bool,
    rng: &mut dyn RngCore,
) -> Result<Box<dyn Agent>, AgentError> {
    let norm = Normalizer::new(spec.obs_dim, spec.goal_dim, normalize);
    Ok(match kind {
        AgentKind::Sher => Box::new(SacAgent::new(norm, spec.action_dim, sac.clone(), rng)?),
        AgentKind::HerDdpg => Box::new(DdpgAgent::new(norm, spec.action_dim, ddpg.clone(), rng)?),
    })
}

/// Restores an agent saved with [`Agent::to_checkpoint`].
pub fn agent_from_checkpoint(ckpt: &Checkpoint) -> Result<Box<dyn Agent>, AgentError> {
    match ckpt.kind.parse::<AgentKind>().map_err(AgentError::Checkpoint)? {
        AgentKind::Sher => Ok(Box::new(SacAgent::from_checkpoint(ckpt)?)),
        AgentKind::HerDdpg => Ok(Box::new(DdpgAgent::from_checkpoint(ckpt)?)),
    }
}
