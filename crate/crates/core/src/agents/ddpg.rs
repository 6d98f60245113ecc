//! Deterministic actor-critic baseline with target actor and critic.
//!
//! Critic target `y = clip(r + γ (1 − d) Q'(s', μ'(s')), −1/(1 − γ), 0)`;
//! actor loss `−mean Q(s, μ(s)) + action_l2 · mean μ(s)²`.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::sac::{half_weighted_mse, layer_sizes, normalizer_from_checkpoint, normalizer_to_checkpoint, sizes_of};
use super::{
    polyak_update, ActMode, Agent, AgentError, AgentKind, BatchTensors, Checkpoint, LossGrad, Normalizer,
    UpdateDiagnostics,
};
use crate::diffcore::{adam_step, AdamConfig, AdamState, DiffError, Mlp, OutputActivation, Tape, Tensor};
use crate::envs::GoalObservation;
use crate::replay::{EpisodeRecord, ReplayBuffer};

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgConfig {
    pub gamma: f64,
    pub rho: f64,
    pub batch_size: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub hidden: Vec<usize>,
    /// Weight of the squared-action penalty in the actor loss.
    pub action_l2: f64,
    /// Std of the Gaussian exploration noise.
    pub noise_eps: f64,
    /// Probability of a uniformly random exploration action.
    pub random_eps: f64,
    /// Clip critic targets to the attainable return range.
    pub clip_return: bool,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.98,
            rho: 0.95,
            batch_size: 128,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            hidden: vec![64, 64],
            action_l2: 1.0,
            noise_eps: 0.2,
            random_eps: 0.3,
            clip_return: true,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: String| Err(AgentError::Config(m));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if self.batch_size == 0 {
            return fail("batch size must be positive".into());
        }
        if !(self.lr_actor >= 0.0 && self.lr_critic >= 0.0) {
            return fail("learning rates must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.random_eps) || self.noise_eps < 0.0 {
            return fail("exploration parameters out of range".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DdpgParams {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_targ: Mlp,
    pub critic_targ: Mlp,
}

impl DdpgParams {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let actor = Mlp::new(&layer_sizes(state_dim, hidden, action_dim), OutputActivation::Tanh, rng);
        let critic = Mlp::new(&layer_sizes(state_dim + action_dim, hidden, 1), OutputActivation::Linear, rng);
        Self {
            actor_targ: actor.clone(),
            critic_targ: critic.clone(),
            actor,
            critic,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn is_finite(&self) -> bool {
        [&self.actor, &self.critic, &self.actor_targ, &self.critic_targ]
            .iter()
            .all(|n| n.params().iter().all(Tensor::is_finite))
    }
}

pub fn critic_targets(params: &DdpgParams, batch: &BatchTensors, cfg: &DdpgConfig) -> Result<Tensor, DiffError> {
    let a_next = params.actor_targ.predict(&batch.next_states)?;
    let q_next = params.critic_targ.predict(&batch.next_states.concat_cols(&a_next))?;
    let lo = -1.0 / (1.0 - cfg.gamma);
    let y = (0..batch.len())
        .map(|i| {
            let y = batch.rewards.data()[i] + cfg.gamma * (1.0 - batch.dones.data()[i]) * q_next.data()[i];
            if cfg.clip_return {
                y.clamp(lo, 0.0)
            } else {
                y
            }
        })
        .collect();
    Ok(Tensor::matrix(batch.len(), 1, y))
}

/// Critic regression loss and the batch mean of `Q(s, a)`.
pub fn critic_loss(params: &DdpgParams, batch: &BatchTensors, y: &Tensor) -> Result<(LossGrad, f64), DiffError> {
    let mut tape = Tape::new();
    let sa = tape.constant(batch.state_actions());
    let q = params.critic.forward(&mut tape, sa)?;
    let loss = half_weighted_mse(&mut tape, q.output, y, &batch.weights);
    let grads = tape.backward(loss)?;
    let value = tape.value(loss).item();
    Ok((
        LossGrad {
            value,
            grads: q.gradients(&grads),
        },
        tape.value(q.output).mean(),
    ))
}

pub fn actor_loss(params: &DdpgParams, batch: &BatchTensors, action_l2: f64) -> Result<LossGrad, DiffError> {
    let mut tape = Tape::new();
    let s = tape.constant(batch.states.clone());
    let pi = params.actor.forward(&mut tape, s)?;
    let sa = tape.concat_cols(s, pi.output);
    let q = params.critic.forward_frozen(&mut tape, sa)?;
    let w = tape.constant(batch.weights.clone());
    let wq = tape.mul(q.output, w);
    let mq = tape.mean(wq);
    let neg_q = tape.scale(mq, -1.0);
    let sq = tape.square(pi.output);
    let msq = tape.mean(sq);
    let pen = tape.scale(msq, action_l2);
    let loss = tape.add(neg_q, pen);
    let grads = tape.backward(loss)?;
    Ok(LossGrad {
        value: tape.value(loss).item(),
        grads: pi.gradients(&grads),
    })
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    cfg: DdpgConfig,
    params: DdpgParams,
    opt_actor: AdamState,
    opt_critic: AdamState,
    norm: Normalizer,
}

impl DdpgAgent {
    pub fn new<R: Rng + ?Sized>(norm: Normalizer, action_dim: usize, cfg: DdpgConfig, rng: &mut R) -> Result<Self, AgentError> {
        cfg.validate()?;
        let params = DdpgParams::new(norm.state_dim(), action_dim, &cfg.hidden, rng);
        Ok(Self::from_parts(norm, params, cfg))
    }

    pub fn from_parts(norm: Normalizer, params: DdpgParams, cfg: DdpgConfig) -> Self {
        let actor_cfg = AdamConfig {
            lr: cfg.lr_actor,
            ..AdamConfig::default()
        };
        let critic_cfg = AdamConfig {
            lr: cfg.lr_critic,
            ..AdamConfig::default()
        };
        Self {
            opt_actor: AdamState::new(params.actor.params(), actor_cfg),
            opt_critic: AdamState::new(params.critic.params(), critic_cfg),
            cfg,
            params,
            norm,
        }
    }

    pub fn config(&self) -> &DdpgConfig {
        &self.cfg
    }

    pub fn params(&self) -> &DdpgParams {
        &self.params
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    /// Both losses at the pre-update parameters, then one Adam step each
    /// and Polyak averaging of both targets.
    pub fn update_on_batch(&mut self, batch: &BatchTensors) -> Result<UpdateDiagnostics, AgentError> {
        let y = critic_targets(&self.params, batch, &self.cfg)?;
        let (critic, mean_q) = critic_loss(&self.params, batch, &y)?;
        let actor = actor_loss(&self.params, batch, self.cfg.action_l2)?;
        let diag = UpdateDiagnostics {
            q_loss: critic.value,
            v_loss: 0.0,
            pi_loss: actor.value,
            mean_q,
            entropy: 0.0,
        };
        diag.ensure_finite()?;
        let p = &mut self.params;
        adam_step(p.critic.params_mut(), &critic.grads, &mut self.opt_critic)?;
        adam_step(p.actor.params_mut(), &actor.grads, &mut self.opt_actor)?;
        polyak_update(p.critic_targ.params_mut(), p.critic.params(), self.cfg.rho)?;
        polyak_update(p.actor_targ.params_mut(), p.actor.params(), self.cfg.rho)?;
        if !p.is_finite() {
            return Err(AgentError::NonFinite {
                what: "parameters",
                diagnostics: format!("{diag:?}"),
            });
        }
        Ok(diag)
    }

    pub fn update_step<R: Rng + ?Sized>(
        &mut self,
        buffer: &mut ReplayBuffer,
        rng: &mut R,
    ) -> Result<UpdateDiagnostics, AgentError> {
        let batch = buffer.sample_minibatch(self.cfg.batch_size, rng)?;
        self.update_on_batch(&BatchTensors::from_batch(&batch, &self.norm))
    }

    /// Gaussian-perturbed, clipped greedy action, replaced by a uniform
    /// random one with probability `random_eps`.
    pub fn explore_action<R: Rng + ?Sized>(&self, greedy: &[f64], rng: &mut R) -> Vec<f64> {
        let noisy: Vec<f64> = greedy
            .iter()
            .map(|&a| {
                let n: f64 = rng.sample(StandardNormal);
                (a + self.cfg.noise_eps * n).clamp(-1.0, 1.0)
            })
            .collect();
        let random: Vec<f64> = (0..greedy.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        if rng.random::<f64>() < self.cfg.random_eps {
            random
        } else {
            noisy
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        let net = |name: &str, out: OutputActivation| -> Result<Mlp, AgentError> {
            let params = ckpt.group(name);
            Ok(Mlp::from_params(&sizes_of(&params)?, out, params)?)
        };
        let params = DdpgParams {
            actor: net("actor", OutputActivation::Tanh)?,
            critic: net("critic", OutputActivation::Linear)?,
            actor_targ: net("actor_targ", OutputActivation::Tanh)?,
            critic_targ: net("critic_targ", OutputActivation::Linear)?,
        };
        let s = |n: &str| ckpt.get(n).map(Tensor::item);
        let sizes = params.actor.sizes();
        let cfg = DdpgConfig {
            gamma: s("cfg.gamma")?,
            rho: s("cfg.rho")?,
            batch_size: s("cfg.batch_size")? as usize,
            lr_actor: s("cfg.lr_actor")?,
            lr_critic: s("cfg.lr_critic")?,
            hidden: sizes[1..sizes.len() - 1].to_vec(),
            action_l2: s("cfg.action_l2")?,
            noise_eps: s("cfg.noise_eps")?,
            random_eps: s("cfg.random_eps")?,
            clip_return: s("cfg.clip_return")? != 0.0,
        };
        let norm = normalizer_from_checkpoint(ckpt)?;
        if norm.state_dim() != params.actor.input_dim() {
            return Err(AgentError::Checkpoint("normaliser and network widths disagree".into()));
        }
        Ok(Self::from_parts(norm, params, cfg))
    }
}

impl Agent for DdpgAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::HerDdpg
    }

    fn act(&self, obs: &GoalObservation, mode: ActMode, rng: &mut dyn RngCore) -> Result<Vec<f64>, AgentError> {
        let state = self.norm.state(obs);
        let greedy = self.params.actor.predict(&Tensor::matrix(1, state.len(), state))?.into_data();
        Ok(match mode {
            ActMode::Explore => self.explore_action(&greedy, rng),
            ActMode::Greedy => greedy,
        })
    }

    fn observe_episode(&mut self, episode: &EpisodeRecord) {
        self.norm.observe_episode(episode);
    }

    fn update(&mut self, buffer: &mut ReplayBuffer, rng: &mut dyn RngCore) -> Result<UpdateDiagnostics, AgentError> {
        self.update_step(buffer, rng)
    }

    fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(AgentKind::HerDdpg.as_str());
        let p = &self.params;
        c.push_group("actor", p.actor.params());
        c.push_group("critic", p.critic.params());
        c.push_group("actor_targ", p.actor_targ.params());
        c.push_group("critic_targ", p.critic_targ.params());
        for (name, x) in [
            ("cfg.gamma", self.cfg.gamma),
            ("cfg.rho", self.cfg.rho),
            ("cfg.batch_size", self.cfg.batch_size as f64),
            ("cfg.lr_actor", self.cfg.lr_actor),
            ("cfg.lr_critic", self.cfg.lr_critic),
            ("cfg.action_l2", self.cfg.action_l2),
            ("cfg.noise_eps", self.cfg.noise_eps),
            ("cfg.random_eps", self.cfg.random_eps),
            ("cfg.clip_return", f64::from(u8::from(self.cfg.clip_return))),
        ] {
            c.push(name, Tensor::scalar(x));
        }
        normalizer_to_checkpoint(&self.norm, &mut c);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::random_batch;
    use super::*;
    use crate::diffcore::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small(seed: u64, cfg: DdpgConfig) -> DdpgAgent {
        DdpgAgent::new(Normalizer::new(2, 2, false), 2, cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    fn small_cfg() -> DdpgConfig {
        DdpgConfig {
            hidden: vec![8, 8],
            batch_size: 16,
            ..DdpgConfig::default()
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            let a = small(seed, small_cfg());
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let batch = random_batch(6, 4, 2, &mut rng);
            let y = critic_targets(a.params(), &batch, a.config()).unwrap();
            let err = grad_check(a.params().critic.params(), 1e-5, |ps| {
                let mut p = a.params().clone();
                p.critic.set_params(ps.to_vec()).unwrap();
                let (l, _) = critic_loss(&p, &batch, &y).unwrap();
                (l.value, l.grads)
            });
            assert!(err < 1e-4, "critic: {err}");
            let err = grad_check(a.params().actor.params(), 1e-5, |ps| {
                let mut p = a.params().clone();
                p.actor.set_params(ps.to_vec()).unwrap();
                let l = actor_loss(&p, &batch, 1.0).unwrap();
                (l.value, l.grads)
            });
            assert!(err < 1e-4, "actor: {err}");
        }
    }

    #[test]
    fn targets_respect_return_range() {
        let a = small(1, DdpgConfig { gamma: 0.9, ..small_cfg() });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut batch = random_batch(20, 4, 2, &mut rng);
        batch.rewards = Tensor::filled(&[20, 1], -1.0);
        let mut p = a.params().clone();
        let last = p.critic_targ.params().len() - 1;
        p.critic_targ.params_mut()[last].data_mut()[0] = -1e3;
        let y = critic_targets(&p, &batch, a.config()).unwrap();
        let lo = -1.0 / (1.0 - 0.9);
        assert!(y.data().iter().all(|&v| (lo..=0.0).contains(&v)));
        p.critic_targ.params_mut()[last].data_mut()[0] = 1e3;
        let y = critic_targets(&p, &batch, a.config()).unwrap();
        assert!(y.data().iter().all(|&v| v <= 0.0));
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut a = small(3, DdpgConfig { lr_actor: 0.0, lr_critic: 0.0, rho: 1.0, ..small_cfg() });
        let before = a.params().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = random_batch(16, 4, 2, &mut rng);
        a.update_on_batch(&batch).unwrap();
        assert_eq!(&before, a.params());
    }

    #[test]
    fn updates_are_deterministic_and_move_all_networks() {
        let run = || {
            let mut a = small(5, small_cfg());
            let mut rng = ChaCha8Rng::seed_from_u64(6);
            let batch = random_batch(16, 4, 2, &mut rng);
            let d: Vec<_> = (0..4).map(|_| a.update_on_batch(&batch).unwrap()).collect();
            (d, a.params().clone())
        };
        let (d1, p1) = run();
        let (d2, p2) = run();
        assert_eq!(d1, d2);
        assert_eq!(p1, p2);
        let init = small(5, small_cfg()).params().clone();
        assert_ne!(init.actor, p1.actor);
        assert_ne!(init.critic, p1.critic);
        assert_ne!(init.actor_targ, p1.actor_targ);
        assert_ne!(init.critic_targ, p1.critic_targ);
    }

    #[test]
    fn exploration_mixes_noise_and_uniform() {
        let a = small(7, small_cfg());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let greedy = [0.95, -0.2];
        let mut far = 0;
        for _ in 0..5000 {
            let x = a.explore_action(&greedy, &mut rng);
            assert!(x.iter().all(|v| (-1.0..=1.0).contains(v)));
            if (x[1] + 0.2).abs() > 0.8 {
                far += 1;
            }
        }
        // beyond 4σ of Gaussian noise: only uniform draws, which land
        // there with probability 0.2
        let frac = far as f64 / 5000.0;
        assert!((frac - 0.3 * 0.2).abs() < 0.015, "{frac}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let a = small(9, small_cfg());
        let back = DdpgAgent::from_checkpoint(&a.to_checkpoint()).unwrap();
        assert_eq!(back.params(), a.params());
        assert_eq!(back.config(), a.config());
    }
}
