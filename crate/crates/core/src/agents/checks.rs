//! Finite-difference audit of every learner loss on synthetic batches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ddpg::{actor_loss, critic_loss, critic_targets, DdpgConfig, DdpgParams};
use super::sac::{compute_targets, pi_loss, q_loss, sample_noise, squash, v_loss, ParamSet, SacConfig};
use super::{AgentError, BatchTensors};
use crate::diffcore::{grad_check, Tensor};

/// Random batch with rewards in {0, -1} and a mix of terminal flags.
pub fn synthetic_batch<R: Rng + ?Sized>(b: usize, ds: usize, da: usize, rng: &mut R) -> BatchTensors {
    let mut m = |r: usize, c: usize, lo: f64, hi: f64| {
        Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)).collect())
    };
    let states = m(b, ds, -1.5, 1.5);
    let actions = m(b, da, -0.99, 0.99);
    let next_states = m(b, ds, -1.5, 1.5);
    let rewards = Tensor::matrix(b, 1, (0..b).map(|i| if i % 3 == 0 { 0.0 } else { -1.0 }).collect());
    let dones = Tensor::matrix(b, 1, (0..b).map(|i| if i % 4 == 3 { 1.0 } else { 0.0 }).collect());
    BatchTensors {
        states,
        actions,
        rewards,
        next_states,
        dones,
        weights: Tensor::filled(&[b, 1], 1.0),
    }
}

/// Largest relative gradient error seen for one loss.
#[derive(Clone, Debug, PartialEq)]
pub struct LossCheck {
    pub name: &'static str,
    pub max_error: f64,
}

const SHAPES: &str = "shapes are fixed by construction";

pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Draws whose pre-activations all clear this distance from zero are far
/// enough from a nondifferentiable point for a step of `GRAD_CHECK_STEP`.
pub const KINK_MARGIN: f64 = 1e-3;

/// Distance of every differentiated network from its nearest kink on this
/// batch, including the `min` between the twin critics in the policy loss.
fn margin(params: &ParamSet, dp: &DdpgParams, batch: &BatchTensors, noise: &Tensor, sac: &SacConfig) -> Result<f64, AgentError> {
    let sa = batch.state_actions();
    let out = params.policy.predict(&batch.states)?;
    let da = params.action_dim();
    let actions: Vec<f64> = (0..batch.len())
        .flat_map(|i| {
            let row = out.row(i);
            squash(&row[..da], &row[da..], noise.row(i), sac.bounds()).action
        })
        .collect();
    let s_pi = batch.states.concat_cols(&Tensor::matrix(batch.len(), da, actions));
    let (q1, q2) = (params.q1.predict(&s_pi)?, params.q2.predict(&s_pi)?);
    let tie = q1.data().iter().zip(q2.data()).map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min);
    let s_mu = batch.states.concat_cols(&dp.actor.predict(&batch.states)?);
    let margins = [
        params.v.kink_margin(&batch.states)?,
        params.q1.kink_margin(&sa)?,
        params.q2.kink_margin(&sa)?,
        params.policy.kink_margin(&batch.states)?,
        params.q1.kink_margin(&s_pi)?,
        params.q2.kink_margin(&s_pi)?,
        tie,
        dp.critic.kink_margin(&sa)?,
        dp.actor.kink_margin(&batch.states)?,
        dp.critic.kink_margin(&s_mu)?,
    ];
    Ok(margins.into_iter().fold(f64::INFINITY, f64::min))
}

/// Central-difference check of the value, twin-critic and policy losses
/// (noise held fixed) and both DDPG losses, each on `batches` fresh random
/// networks and batches. Draws closer than [`KINK_MARGIN`] to a kink are
/// redrawn.
pub fn loss_gradient_errors(batches: usize, seed: u64) -> Result<Vec<LossCheck>, AgentError> {
    let (ds, da, b, hidden) = (4, 2, 6, [8, 8]);
    let sac = SacConfig::default();
    let ddpg = DdpgConfig::default();
    let mut worst = [0.0f64; 5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = GRAD_CHECK_STEP;
    let mut checked = 0;
    while checked < batches {
        let params = ParamSet::new(ds, da, &hidden, &mut rng);
        let batch = synthetic_batch(b, ds, da, &mut rng);
        let noise = sample_noise(b, da, &mut rng);
        let dp = DdpgParams::new(ds, da, &hidden, &mut rng);
        // central differences are only valid away from relu kinks and min ties
        if margin(&params, &dp, &batch, &noise, &sac)? < KINK_MARGIN {
            continue;
        }
        checked += 1;
        let t = compute_targets(&params, &batch, &noise, &sac)?;

        worst[0] = worst[0].max(grad_check(params.v.params(), h, |ps| {
            let mut p = params.clone();
            p.v.set_params(ps.to_vec()).unwrap();
            let l = v_loss(&p, &batch, &t.y_v).expect(SHAPES);
            (l.value, l.grads)
        }));

        let n1 = params.q1.params().len();
        let joint: Vec<Tensor> = params.q1.params().iter().chain(params.q2.params()).cloned().collect();
        worst[1] = worst[1].max(grad_check(&joint, h, |ps| {
            let mut p = params.clone();
            p.q1.set_params(ps[..n1].to_vec()).unwrap();
            p.q2.set_params(ps[n1..].to_vec()).unwrap();
            let l = q_loss(&p, &batch, &t.y_q).expect(SHAPES);
            (l.value, l.grads_q1.into_iter().chain(l.grads_q2).collect())
        }));

        worst[2] = worst[2].max(grad_check(params.policy.params(), h, |ps| {
            let mut p = params.clone();
            p.policy.set_params(ps.to_vec()).unwrap();
            let l = pi_loss(&p, &batch, &noise, sac.alpha, sac.bounds()).expect(SHAPES);
            (l.value, l.grads)
        }));

        let y = critic_targets(&dp, &batch, &ddpg)?;
        worst[3] = worst[3].max(grad_check(dp.critic.params(), h, |ps| {
            let mut p = dp.clone();
            p.critic.set_params(ps.to_vec()).unwrap();
            let (l, _) = critic_loss(&p, &batch, &y).expect(SHAPES);
            (l.value, l.grads)
        }));
        worst[4] = worst[4].max(grad_check(dp.actor.params(), h, |ps| {
            let mut p = dp.clone();
            p.actor.set_params(ps.to_vec()).unwrap();
            let l = actor_loss(&p, &batch, ddpg.action_l2).expect(SHAPES);
            (l.value, l.grads)
        }));
    }
    let names = ["v_loss", "q_loss", "pi_loss", "ddpg_critic_loss", "ddpg_actor_loss"];
    Ok(names.iter().zip(worst).map(|(&name, max_error)| LossCheck { name, max_error }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_losses_pass_on_a_few_batches() {
        let checks = loss_gradient_errors(3, 9).unwrap();
        assert_eq!(checks.len(), 5);
        for c in checks {
            assert!(c.max_error < 1e-4, "{}: {}", c.name, c.max_error);
        }
    }
}
