//! Tabular soft actor-critic on a finite goal MDP.
//!
//! Every network is a lookup table over `(goal, state)`, which is what a
//! bias-free linear layer on a one-hot input computes, and the policy is a
//! softmax over per-row logits. An update is full-batch over every
//! `(s, a, g)` with expected successor values, and follows the continuous
//! learner: both critics regress on `r + γ E V_targ(s')`, the value network
//! on `Σ_a π(a) (min_i Q_i − α log π(a))`, the policy minimises
//! `Σ_a π(a) (α log π(a) − Q_1)`, then the target is Polyak-averaged.

use rand::Rng;

use super::{polyak_update, AgentError, UpdateDiagnostics};
use crate::diffcore::{adam_step, AdamConfig, AdamState, Tensor};
use crate::envs::TabularGoalMDP;

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

#[derive(Clone, Debug)]
pub struct TabularSac {
    mdp: TabularGoalMDP,
    alpha: f64,
    gamma: f64,
    rho: f64,
    /// `[q1, q2, v, logits]`, each `(G·S) x width`.
    tables: [Tensor; 4],
    v_targ: Tensor,
    opts: [AdamState; 4],
}

impl TabularSac {
    pub fn new<R: Rng + ?Sized>(
        mdp: TabularGoalMDP,
        alpha: f64,
        gamma: f64,
        rho: f64,
        adam: AdamConfig,
        rng: &mut R,
    ) -> Self {
        let rows = mdp.n_goals() * mdp.n_states();
        let na = mdp.n_actions();
        let mut init = |c: usize| Tensor::matrix(rows, c, (0..rows * c).map(|_| rng.random_range(-0.1..0.1)).collect());
        let tables = [init(na), init(na), init(1), init(na)];
        let opts = [0, 1, 2, 3].map(|i| AdamState::new(std::slice::from_ref(&tables[i]), adam));
        Self {
            v_targ: tables[2].clone(),
            mdp,
            alpha,
            gamma,
            rho,
            tables,
            opts,
        }
    }

    fn row(&self, s: usize, gi: usize) -> usize {
        gi * self.mdp.n_states() + s
    }

    /// Goal-major `Q_1` table, laid out like the oracle's.
    pub fn q1(&self) -> &[f64] {
        self.tables[0].data()
    }

    pub fn q2(&self) -> &[f64] {
        self.tables[1].data()
    }

    pub fn v(&self) -> &[f64] {
        self.tables[2].data()
    }

    pub fn logits(&self) -> &Tensor {
        &self.tables[3]
    }

    /// Goal-major `π(a | s, g)` table.
    pub fn policy(&self) -> Vec<f64> {
        let na = self.mdp.n_actions();
        self.tables[3]
            .data()
            .chunks(na)
            .flat_map(|r| log_softmax(r).into_iter().map(f64::exp))
            .collect()
    }

    /// Policy loss and its gradient with respect to the logits, for a given
    /// critic table.
    pub fn policy_loss(logits: &Tensor, q1: &Tensor, alpha: f64) -> (f64, Tensor) {
        let (n, na) = (logits.rows(), logits.cols());
        let mut grad = vec![0.0; n * na];
        let mut loss = 0.0;
        for i in 0..n {
            let lp = log_softmax(logits.row(i));
            let f: Vec<f64> = lp.iter().zip(q1.row(i)).map(|(l, q)| alpha * l - q).collect();
            let mean_f: f64 = lp.iter().zip(&f).map(|(l, f)| l.exp() * f).sum();
            loss += mean_f;
            for a in 0..na {
                grad[i * na + a] = lp[a].exp() * (f[a] - mean_f) / n as f64;
            }
        }
        (loss / n as f64, Tensor::matrix(n, na, grad))
    }

    pub fn step(&mut self) -> Result<UpdateDiagnostics, AgentError> {
        let (ns, na, ng) = (self.mdp.n_states(), self.mdp.n_actions(), self.mdp.n_goals());
        let n = ns * ng;
        let [q1, q2, v, logits] = &self.tables;
        let mut g_q1 = vec![0.0; n * na];
        let mut g_q2 = vec![0.0; n * na];
        let mut g_v = vec![0.0; n];
        let (mut q_loss, mut v_loss, mut entropy) = (0.0, 0.0, 0.0);
        for gi in 0..ng {
            for s in 0..ns {
                let i = self.row(s, gi);
                let lp = log_softmax(logits.row(i));
                let mut y_v = 0.0;
                for a in 0..na {
                    let ev: f64 = self.mdp.successors(s, a).iter().map(|&(n, p)| p * self.v_targ.data()[self.row(n, gi)]).sum();
                    let y_q = self.mdp.reward(s, a, gi) + self.gamma * ev;
                    let k = i * na + a;
                    let (d1, d2) = (q1.data()[k] - y_q, q2.data()[k] - y_q);
                    q_loss += 0.5 * (d1 * d1 + d2 * d2);
                    g_q1[k] = d1 / (n * na) as f64;
                    g_q2[k] = d2 / (n * na) as f64;
                    let min_q = q1.data()[k].min(q2.data()[k]);
                    y_v += lp[a].exp() * (min_q - self.alpha * lp[a]);
                    entropy -= lp[a].exp() * lp[a];
                }
                let dv = v.data()[i] - y_v;
                v_loss += 0.5 * dv * dv;
                g_v[i] = dv / n as f64;
            }
        }
        let (pi_loss, g_pi) = Self::policy_loss(logits, q1, self.alpha);
        let diag = UpdateDiagnostics {
            q_loss: q_loss / (n * na) as f64,
            v_loss: v_loss / n as f64,
            pi_loss,
            mean_q: q1.mean(),
            entropy: entropy / n as f64,
        };
        diag.ensure_finite()?;
        let grads = [
            Tensor::matrix(n, na, g_q1),
            Tensor::matrix(n, na, g_q2),
            Tensor::matrix(n, 1, g_v),
            g_pi,
        ];
        for ((t, g), o) in self.tables.iter_mut().zip(grads).zip(&mut self.opts) {
            adam_step(std::slice::from_mut(t), &[g], o)?;
        }
        polyak_update(std::slice::from_mut(&mut self.v_targ), std::slice::from_ref(&self.tables[2]), self.rho)?;
        Ok(diag)
    }
}
