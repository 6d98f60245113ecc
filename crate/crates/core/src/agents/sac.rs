//! Goal-conditioned soft actor-critic with a tanh-squashed Gaussian
//! policy, twin soft Q critics, a state-value network and its Polyak
//! target.
//!
//! Targets: `y_q = r + γ (1 − d) V_targ(s')` and
//! `y_v = min_i Q_i(s, ã) − α log π(ã | s)` with `ã` freshly reparameterised
//! from the current policy. Losses are batch-weighted means of
//! `½ (V − y_v)²`, `½ (Q_i − y_q)²` summed over both critics, and
//! `α log π(ã | s) − Q_1(s, ã)`.

use std::f64::consts::LN_2;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{
    polyak_update, ActMode, Agent, AgentError, AgentKind, BatchTensors, Checkpoint, LossGrad, Normalizer,
    RunningStats, UpdateDiagnostics,
};
use crate::diffcore::{adam_step, AdamConfig, AdamState, DiffError, Mlp, MlpNodes, NodeId, OutputActivation, Tape, Tensor};
use crate::envs::GoalObservation;
use crate::replay::{EpisodeRecord, ReplayBuffer};

/// `½ ln 2π`.
pub const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Clone, Debug, PartialEq)]
pub struct SacConfig {
    /// Entropy temperature.
    pub alpha: f64,
    pub gamma: f64,
    /// Target averaging weight; 1 freezes the target.
    pub rho: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub log_std_min: f64,
    pub log_std_max: f64,
    /// Weight of the `mean_j μ_j²` penalty on the pre-squash policy mean.
    pub mean_reg: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            gamma: 0.98,
            rho: 0.95,
            batch_size: 128,
            lr: 1e-3,
            hidden: vec![64, 64],
            log_std_min: -20.0,
            log_std_max: 2.0,
            mean_reg: 0.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: String| Err(AgentError::Config(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("learning rate must be non-negative, got {}", self.lr));
        }
        if !(self.log_std_min < self.log_std_max) {
            return fail("log-std bounds are empty".into());
        }
        if !(self.mean_reg >= 0.0 && self.mean_reg.is_finite()) {
            return fail(format!("mean penalty must be non-negative, got {}", self.mean_reg));
        }
        Ok(())
    }

    pub(crate) fn bounds(&self) -> (f64, f64) {
        (self.log_std_min, self.log_std_max)
    }
}

pub(crate) fn layer_sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

/// Layer widths recovered from a flat `[w0, b0, ...]` list.
pub(crate) fn sizes_of(params: &[Tensor]) -> Result<Vec<usize>, AgentError> {
    if params.is_empty() || params.len() % 2 != 0 {
        return Err(AgentError::Checkpoint("network has an odd number of tensors".into()));
    }
    let mut s = vec![params[0].rows()];
    s.extend(params.iter().step_by(2).map(Tensor::cols));
    Ok(s)
}

/// Policy, twin critics, value network and value target.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    /// Emits `[mean ‖ raw log-std]`.
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub v: Mlp,
    pub v_targ: Mlp,
}

impl ParamSet {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let policy = Mlp::new(&layer_sizes(state_dim, hidden, 2 * action_dim), OutputActivation::Linear, rng);
        let q_sizes = layer_sizes(state_dim + action_dim, hidden, 1);
        let q1 = Mlp::new(&q_sizes, OutputActivation::Linear, rng);
        let q2 = Mlp::new(&q_sizes, OutputActivation::Linear, rng);
        let v = Mlp::new(&layer_sizes(state_dim, hidden, 1), OutputActivation::Linear, rng);
        Self {
            v_targ: v.clone(),
            policy,
            q1,
            q2,
            v,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.v.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.policy.output_dim() / 2
    }

    pub fn is_finite(&self) -> bool {
        [&self.policy, &self.q1, &self.q2, &self.v, &self.v_targ]
            .iter()
            .all(|n| n.params().iter().all(Tensor::is_finite))
    }
}

/// One sampled action with everything needed to reproduce it.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    /// `tanh(pre_tanh)`.
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub pre_tanh: Vec<f64>,
    pub noise: Vec<f64>,
}

/// `−ln(1 − tanh² u) = 2 (u + softplus(−2u) − ln 2)`, exact for large `|u|`.
fn neg_log_tanh_jacobian(u: f64) -> f64 {
    2.0 * (u + crate::diffcore::softplus(-2.0 * u) - LN_2)
}

/// Squashes `mean + exp(clamp(raw_log_std)) * noise` and scores it.
pub fn squash(mean: &[f64], raw_log_std: &[f64], noise: &[f64], bounds: (f64, f64)) -> PolicyOutput {
    let mut out = PolicyOutput {
        action: Vec::with_capacity(mean.len()),
        log_prob: 0.0,
        pre_tanh: Vec::with_capacity(mean.len()),
        noise: noise.to_vec(),
    };
    for ((&m, &r), &e) in mean.iter().zip(raw_log_std).zip(noise) {
        let ls = r.clamp(bounds.0, bounds.1);
        let u = m + ls.exp() * e;
        out.pre_tanh.push(u);
        out.action.push(u.tanh());
        out.log_prob += -0.5 * e * e - HALF_LOG_2PI - ls + neg_log_tanh_jacobian(u);
    }
    out
}

/// Log-density of a squashed action for given pre-squash mean and log-std.
pub fn squashed_log_density(action: &[f64], mean: &[f64], log_std: &[f64]) -> f64 {
    action
        .iter()
        .zip(mean)
        .zip(log_std)
        .map(|((&a, &m), &ls)| {
            let u = a.atanh();
            let z = (u - m) / ls.exp();
            -0.5 * z * z - HALF_LOG_2PI - ls + neg_log_tanh_jacobian(u)
        })
        .sum()
}

pub fn sample_noise<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}

/// Draws `a = tanh(μ + σ ε)` for one normalised `obs ‖ goal` row.
pub fn sample_action<R: Rng + ?Sized>(
    policy: &Mlp,
    state: &[f64],
    cfg: &SacConfig,
    rng: &mut R,
) -> Result<PolicyOutput, DiffError> {
    let out = policy.predict(&Tensor::matrix(1, state.len(), state.to_vec()))?;
    let da = policy.output_dim() / 2;
    let noise: Vec<f64> = (0..da).map(|_| rng.sample(StandardNormal)).collect();
    Ok(squash(&out.data()[..da], &out.data()[da..], &noise, cfg.bounds()))
}

/// `tanh(μ)`.
pub fn deterministic_action(policy: &Mlp, state: &[f64]) -> Result<Vec<f64>, DiffError> {
    let out = policy.predict(&Tensor::matrix(1, state.len(), state.to_vec()))?;
    let da = policy.output_dim() / 2;
    Ok(out.data()[..da].iter().map(|m| m.tanh()).collect())
}

/// Tape nodes of a reparameterised policy sample for a whole batch.
pub struct PolicyGraph {
    pub nodes: MlpNodes,
    pub mean: NodeId,
    pub log_std: NodeId,
    pub action: NodeId,
    /// `B x 1`.
    pub log_prob: NodeId,
}

/// Records `a = tanh(μ + σ ε)` and `log π(a)` with `ε = noise` held fixed.
pub fn policy_graph(
    tape: &mut Tape,
    policy: &Mlp,
    states: NodeId,
    noise: &Tensor,
    bounds: (f64, f64),
    track: bool,
) -> Result<PolicyGraph, DiffError> {
    let nodes = if track {
        policy.forward(tape, states)?
    } else {
        policy.forward_frozen(tape, states)?
    };
    let da = policy.output_dim() / 2;
    let b = tape.value(states).rows();
    if noise.shape() != [b, da] {
        return Err(DiffError::ShapeMismatch {
            context: "policy noise",
            expected: format!("[{b}, {da}]"),
            actual: format!("{:?}", noise.shape()),
        });
    }
    let mean = tape.slice_cols(nodes.output, 0, da);
    let raw = tape.slice_cols(nodes.output, da, 2 * da);
    let log_std = tape.clamp(raw, bounds.0, bounds.1);
    let std = tape.exp(log_std);
    let eps = tape.constant(noise.clone());
    let spread = tape.mul(std, eps);
    let u = tape.add(mean, spread);
    let action = tape.tanh(u);

    let gauss = tape.constant(noise.map(|e| -0.5 * e * e - HALF_LOG_2PI));
    let base = tape.sub(gauss, log_std);
    let m2u = tape.scale(u, -2.0);
    let sp = tape.softplus(m2u);
    let jac = tape.add(u, sp);
    let jac = tape.scale(jac, 2.0);
    let jac = tape.add_scalar(jac, -2.0 * LN_2);
    let per_dim = tape.add(base, jac);
    let log_prob = tape.sum_cols(per_dim);
    Ok(PolicyGraph {
        nodes,
        mean,
        log_std,
        action,
        log_prob,
    })
}

/// `½ mean(w (pred − target)²)`.
pub(crate) fn half_weighted_mse(tape: &mut Tape, pred: NodeId, target: &Tensor, weights: &Tensor) -> NodeId {
    let t = tape.constant(target.clone());
    let d = tape.sub(pred, t);
    let sq = tape.square(d);
    let w = tape.constant(weights.clone());
    let wsq = tape.mul(sq, w);
    let m = tape.mean(wsq);
    tape.scale(m, 0.5)
}

/// Per-transition regression targets, all `B x 1` constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub y_q: Tensor,
    pub y_v: Tensor,
    pub log_prob: Tensor,
    pub min_q: Tensor,
}

pub fn compute_targets(
    params: &ParamSet,
    batch: &BatchTensors,
    noise: &Tensor,
    cfg: &SacConfig,
) -> Result<Targets, DiffError> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let pg = policy_graph(&mut tape, &params.policy, s, noise, cfg.bounds(), false)?;
    let sa = batch.states.concat_cols(tape.value(pg.action));
    let q1 = params.q1.predict(&sa)?;
    let q2 = params.q2.predict(&sa)?;
    let log_prob = tape.value(pg.log_prob).clone();
    let min_q = q1.zip_map(&q2, f64::min);
    let y_v = min_q.zip_map(&log_prob, |q, lp| q - cfg.alpha * lp);
    let v_next = params.v_targ.predict(&batch.next_states)?;
    let y_q = Tensor::matrix(
        batch.len(),
        1,
        (0..batch.len())
            .map(|i| batch.rewards.data()[i] + cfg.gamma * (1.0 - batch.dones.data()[i]) * v_next.data()[i])
            .collect(),
    );
    Ok(Targets {
        y_q,
        y_v,
        log_prob,
        min_q,
    })
}

/// Loss of the value network; gradients are for `params.v`.
pub fn v_loss(params: &ParamSet, batch: &BatchTensors, y_v: &Tensor) -> Result<LossGrad, DiffError> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let v = params.v.forward(&mut tape, s)?;
    let loss = half_weighted_mse(&mut tape, v.output, y_v, &batch.weights);
    let grads = tape.backward(loss)?;
    Ok(LossGrad {
        value: tape.value(loss).item(),
        grads: v.gradients(&grads),
    })
}

#[derive(Clone, Debug)]
pub struct QLoss {
    pub value: f64,
    pub grads_q1: Vec<Tensor>,
    pub grads_q2: Vec<Tensor>,
    /// Mean of `Q_1(s, a)` over the batch.
    pub mean_q: f64,
}

/// Summed loss of both critics on the stored actions.
pub fn q_loss(params: &ParamSet, batch: &BatchTensors, y_q: &Tensor) -> Result<QLoss, DiffError> {
    let mut tape = Tape::new();
    let sa = tape.constant(batch.state_actions());
    let q1 = params.q1.forward(&mut tape, sa)?;
    let q2 = params.q2.forward(&mut tape, sa)?;
    let l1 = half_weighted_mse(&mut tape, q1.output, y_q, &batch.weights);
    let l2 = half_weighted_mse(&mut tape, q2.output, y_q, &batch.weights);
    let loss = tape.add(l1, l2);
    let grads = tape.backward(loss)?;
    Ok(QLoss {
        value: tape.value(loss).item(),
        grads_q1: q1.gradients(&grads),
        grads_q2: q2.gradients(&grads),
        mean_q: tape.value(q1.output).mean(),
    })
}

#[derive(Clone, Debug)]
pub struct PiLoss {
    pub value: f64,
    pub grads: Vec<Tensor>,
    pub mean_log_prob: f64,
    pub mean_log_std: f64,
}

/// Reparameterised policy loss; gradients are for `params.policy`, the
/// critic enters as a constant function of the action.
pub fn pi_loss(
    params: &ParamSet,
    batch: &BatchTensors,
    noise: &Tensor,
    alpha: f64,
    bounds: (f64, f64),
) -> Result<PiLoss, DiffError> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let pg = policy_graph(&mut tape, &params.policy, s, noise, bounds, true)?;
    let sa = tape.concat_cols(s, pg.action);
    let q = params.q1.forward_frozen(&mut tape, sa)?;
    let ent = tape.scale(pg.log_prob, alpha);
    let obj = tape.sub(ent, q.output);
    let w = tape.constant(batch.weights.clone());
    let obj = tape.mul(obj, w);
    let loss = tape.mean(obj);
    let grads = tape.backward(loss)?;
    Ok(PiLoss {
        value: tape.value(loss).item(),
        grads: pg.nodes.gradients(&grads),
        mean_log_prob: tape.value(pg.log_prob).mean(),
        mean_log_std: tape.value(pg.log_std).mean(),
    })
}

/// `weight · mean_b w_b Σ_j μ_j(s_b)²`; gradients are for `policy`.
pub fn mean_penalty(policy: &Mlp, batch: &BatchTensors, weight: f64) -> Result<LossGrad, DiffError> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let nodes = policy.forward(&mut tape, s)?;
    let da = policy.output_dim() / 2;
    let mean = tape.slice_cols(nodes.output, 0, da);
    let sq = tape.square(mean);
    let per_row = tape.sum_cols(sq);
    let w = tape.constant(batch.weights.clone());
    let weighted = tape.mul(per_row, w);
    let m = tape.mean(weighted);
    let loss = tape.scale(m, weight);
    let grads = tape.backward(loss)?;
    Ok(LossGrad {
        value: tape.value(loss).item(),
        grads: nodes.gradients(&grads),
    })
}

fn non_finite(what: &'static str, diag: String) -> AgentError {
    AgentError::NonFinite { what, diagnostics: diag }
}

/// A soft actor-critic learner with its optimisers and input normaliser.
#[derive(Clone, Debug)]
pub struct SacAgent {
    cfg: SacConfig,
    params: ParamSet,
    opt_policy: AdamState,
    opt_q1: AdamState,
    opt_q2: AdamState,
    opt_v: AdamState,
    norm: Normalizer,
}

impl SacAgent {
    pub fn new<R: Rng + ?Sized>(norm: Normalizer, action_dim: usize, cfg: SacConfig, rng: &mut R) -> Result<Self, AgentError> {
        cfg.validate()?;
        let params = ParamSet::new(norm.state_dim(), action_dim, &cfg.hidden, rng);
        Ok(Self::from_parts(norm, params, cfg))
    }

    pub fn from_parts(norm: Normalizer, params: ParamSet, cfg: SacConfig) -> Self {
        let adam = AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        };
        Self {
            opt_policy: AdamState::new(params.policy.params(), adam),
            opt_q1: AdamState::new(params.q1.params(), adam),
            opt_q2: AdamState::new(params.q2.params(), adam),
            opt_v: AdamState::new(params.v.params(), adam),
            cfg,
            params,
            norm,
        }
    }

    pub fn config(&self) -> &SacConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    /// One gradient step on every network from a fixed batch and noise.
    /// All losses are evaluated at the pre-update parameters.
    pub fn update_on_batch(&mut self, batch: &BatchTensors, noise: &Tensor) -> Result<UpdateDiagnostics, AgentError> {
        let targets = compute_targets(&self.params, batch, noise, &self.cfg)?;
        let q = q_loss(&self.params, batch, &targets.y_q)?;
        let v = v_loss(&self.params, batch, &targets.y_v)?;
        let pi = pi_loss(&self.params, batch, noise, self.cfg.alpha, self.cfg.bounds())?;
        let diag = UpdateDiagnostics {
            q_loss: q.value,
            v_loss: v.value,
            pi_loss: pi.value,
            mean_q: q.mean_q,
            entropy: -pi.mean_log_prob,
        };
        diag.ensure_finite()?;
        let p = &mut self.params;
        adam_step(p.q1.params_mut(), &q.grads_q1, &mut self.opt_q1)?;
        adam_step(p.q2.params_mut(), &q.grads_q2, &mut self.opt_q2)?;
        adam_step(p.v.params_mut(), &v.grads, &mut self.opt_v)?;
        let mut pi_grads = pi.grads;
        if self.cfg.mean_reg > 0.0 {
            let reg = mean_penalty(&p.policy, batch, self.cfg.mean_reg)?;
            for (g, r) in pi_grads.iter_mut().zip(&reg.grads) {
                *g = g.zip_map(r, |a, b| a + b);
            }
        }
        adam_step(p.policy.params_mut(), &pi_grads, &mut self.opt_policy)?;
        polyak_update(p.v_targ.params_mut(), p.v.params(), self.cfg.rho)?;
        if !p.is_finite() {
            return Err(non_finite("parameters", format!("{diag:?}")));
        }
        Ok(diag)
    }

    /// Samples a relabelled minibatch and applies [`Self::update_on_batch`].
    pub fn update_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<UpdateDiagnostics, AgentError> {
        let batch = buffer.sample_minibatch(self.cfg.batch_size, rng)?;
        let bt = BatchTensors::from_batch(&batch, &self.norm);
        let noise = sample_noise(bt.len(), self.params.action_dim(), rng);
        self.update_on_batch(&bt, &noise)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        let net = |name: &str| -> Result<Mlp, AgentError> {
            let params = ckpt.group(name);
            Ok(Mlp::from_params(&sizes_of(&params)?, OutputActivation::Linear, params)?)
        };
        let params = ParamSet {
            policy: net("policy")?,
            q1: net("q1")?,
            q2: net("q2")?,
            v: net("v")?,
            v_targ: net("v_targ")?,
        };
        let s = |n: &str| ckpt.get(n).map(Tensor::item);
        let cfg = SacConfig {
            alpha: s("cfg.alpha")?,
            gamma: s("cfg.gamma")?,
            rho: s("cfg.rho")?,
            batch_size: s("cfg.batch_size")? as usize,
            lr: s("cfg.lr")?,
            hidden: sizes_of(params.v.params())?[1..params.v.sizes().len() - 1].to_vec(),
            log_std_min: s("cfg.log_std_min")?,
            log_std_max: s("cfg.log_std_max")?,
            mean_reg: s("cfg.mean_reg")?,
        };
        let norm = normalizer_from_checkpoint(ckpt)?;
        if norm.state_dim() != params.state_dim() {
            return Err(AgentError::Checkpoint("normaliser and network widths disagree".into()));
        }
        Ok(Self::from_parts(norm, params, cfg))
    }
}

pub(crate) fn normalizer_to_checkpoint(norm: &Normalizer, ckpt: &mut Checkpoint) {
    for (part, stats) in [("obs", &norm.obs), ("goal", &norm.goal)] {
        let [c, s, q] = stats.to_tensors();
        ckpt.push(format!("norm.{part}.count"), c);
        ckpt.push(format!("norm.{part}.sum"), s);
        ckpt.push(format!("norm.{part}.sumsq"), q);
    }
    ckpt.push("norm.enabled", Tensor::scalar(f64::from(u8::from(norm.enabled))));
}

pub(crate) fn normalizer_from_checkpoint(ckpt: &Checkpoint) -> Result<Normalizer, AgentError> {
    let stats = |part: &str| -> Result<RunningStats, AgentError> {
        RunningStats::from_tensors(
            ckpt.get(&format!("norm.{part}.count"))?,
            ckpt.get(&format!("norm.{part}.sum"))?,
            ckpt.get(&format!("norm.{part}.sumsq"))?,
        )
        .ok_or_else(|| AgentError::Checkpoint(format!("bad {part} statistics")))
    };
    Ok(Normalizer::from_stats(stats("obs")?, stats("goal")?, ckpt.get("norm.enabled")?.item() != 0.0))
}

impl Agent for SacAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Sher
    }

    fn act(&self, obs: &GoalObservation, mode: ActMode, rng: &mut dyn RngCore) -> Result<Vec<f64>, AgentError> {
        let state = self.norm.state(obs);
        Ok(match mode {
            ActMode::Explore => sample_action(&self.params.policy, &state, &self.cfg, rng)?.action,
            ActMode::Greedy => deterministic_action(&self.params.policy, &state)?,
        })
    }

    fn observe_episode(&mut self, episode: &EpisodeRecord) {
        self.norm.observe_episode(episode);
    }

    fn update(&mut self, buffer: &mut ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateDiagnostics, AgentError> {
        self.update_step(buffer, rng)
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(AgentKind::Sher.as_str());
        let p = &self.params;
        c.push_group("policy", p.policy.params());
        c.push_group("q1", p.q1.params());
        c.push_group("q2", p.q2.params());
        c.push_group("v", p.v.params());
        c.push_group("v_targ", p.v_targ.params());
        for (name, x) in [
            ("cfg.alpha", self.cfg.alpha),
            ("cfg.gamma", self.cfg.gamma),
            ("cfg.rho", self.cfg.rho),
            ("cfg.batch_size", self.cfg.batch_size as f64),
            ("cfg.lr", self.cfg.lr),
            ("cfg.log_std_min", self.cfg.log_std_min),
            ("cfg.log_std_max", self.cfg.log_std_max),
            ("cfg.mean_reg", self.cfg.mean_reg),
        ] {
            c.push(name, Tensor::scalar(x));
        }
        normalizer_to_checkpoint(&self.norm, &mut c);
        c
    }
}
