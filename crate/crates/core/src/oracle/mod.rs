//! Exact solvers for tabular goal MDPs.
//!
//! All tables are goal-major: `q[(gi * S + s) * A + a]`, `v[gi * S + s]`,
//! where `gi` indexes `mdp.goals()`.

use rand::Rng;

use crate::envs::TabularGoalMDP;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("discount must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("transition row ({s}, {a}) sums to {total}")]
    NotStochastic { s: usize, a: usize, total: f64 },
    #[error("no convergence after {0} sweeps")]
    NoConvergence(usize),
    #[error("policy table has {actual} entries, expected {expected}")]
    PolicyShape { expected: usize, actual: usize },
    #[error("goal index {0} out of range")]
    Goal(usize),
}

/// `max + α log Σ exp((x - max) / α)`.
pub fn soft_max(xs: &[f64], alpha: f64) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| ((x - m) / alpha).exp()).sum();
    m + alpha * s.ln()
}

fn check(mdp: &TabularGoalMDP, gamma: f64, tol: f64) -> Result<(), OracleError> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(OracleError::Discount(gamma));
    }
    if !(tol > 0.0) {
        return Err(OracleError::Tolerance(tol));
    }
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let total: f64 = mdp.successors(s, a).iter().map(|x| x.1).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(OracleError::NotStochastic { s, a, total });
            }
        }
    }
    Ok(())
}

/// Shared Bellman sweep: `q = r + γ E[v(s')]`, then `v = backup(q row)`.
fn iterate<F: Fn(&[f64]) -> f64>(
    mdp: &TabularGoalMDP,
    gamma: f64,
    tol: f64,
    backup: F,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), OracleError> {
    let (ns, na, ng) = (mdp.n_states(), mdp.n_actions(), mdp.n_goals());
    let mut q = vec![0.0; ng * ns * na];
    let mut v = vec![0.0; ng * ns];
    let mut residuals = Vec::new();
    for _ in 0..MAX_SWEEPS {
        let mut residual: f64 = 0.0;
        for gi in 0..ng {
            for s in 0..ns {
                for a in 0..na {
                    let ev: f64 = mdp.successors(s, a).iter().map(|&(n, p)| p * v[gi * ns + n]).sum();
                    let new = mdp.reward(s, a, gi) + gamma * ev;
                    let cell = &mut q[(gi * ns + s) * na + a];
                    residual = residual.max((new - *cell).abs());
                    *cell = new;
                }
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = backup(&q[i * na..(i + 1) * na]);
        }
        residuals.push(residual);
        if residual < tol {
            return Ok((q, v, residuals));
        }
    }
    Err(OracleError::NoConvergence(MAX_SWEEPS))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SoftSolution {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_goals: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub pi: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
    pub iterations: usize,
    /// Sup-norm change of Q at each sweep.
    pub residuals: Vec<f64>,
}

impl SoftSolution {
    pub fn q(&self, s: usize, a: usize, gi: usize) -> f64 {
        self.q[(gi * self.n_states + s) * self.n_actions + a]
    }

    pub fn v(&self, s: usize, gi: usize) -> f64 {
        self.v[gi * self.n_states + s]
    }

    pub fn pi(&self, s: usize, a: usize, gi: usize) -> f64 {
        self.pi[(gi * self.n_states + s) * self.n_actions + a]
    }

    pub fn pi_row(&self, s: usize, gi: usize) -> &[f64] {
        let i = (gi * self.n_states + s) * self.n_actions;
        &self.pi[i..i + self.n_actions]
    }

    pub fn entropy(&self, s: usize, gi: usize) -> f64 {
        entropy(self.pi_row(s, gi))
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `π(a) ∝ exp(q(a) / α)`, normalised with max subtraction.
pub fn softmax_policy(q_row: &[f64], alpha: f64) -> Vec<f64> {
    let v = soft_max(q_row, alpha);
    q_row.iter().map(|&x| ((x - v) / alpha).exp()).collect()
}

/// Fixed point of the soft Bellman backup with `V = α logsumexp(Q / α)`.
pub fn soft_value_iteration(
    mdp: &TabularGoalMDP,
    alpha: f64,
    gamma: f64,
    tol: f64,
) -> Result<SoftSolution, OracleError> {
    if !(alpha > 0.0) {
        return Err(OracleError::Temperature(alpha));
    }
    check(mdp, gamma, tol)?;
    let (q, v, residuals) = iterate(mdp, gamma, tol, |row| soft_max(row, alpha))?;
    let na = mdp.n_actions();
    let pi = q
        .chunks(na)
        .zip(&v)
        .flat_map(|(row, &vs)| row.iter().map(move |&x| ((x - vs) / alpha).exp()))
        .collect();
    Ok(SoftSolution {
        n_states: mdp.n_states(),
        n_actions: na,
        n_goals: mdp.n_goals(),
        q,
        v,
        pi,
        alpha,
        gamma,
        iterations: residuals.len(),
        residuals,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HardSolution {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
}

/// Fixed point of the standard Bellman optimality backup.
pub fn hard_value_iteration(mdp: &TabularGoalMDP, gamma: f64, tol: f64) -> Result<HardSolution, OracleError> {
    check(mdp, gamma, tol)?;
    let (q, v, residuals) = iterate(mdp, gamma, tol, |row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))?;
    Ok(HardSolution {
        q,
        v,
        iterations: residuals.len(),
    })
}

/// Probability of restarting from a uniformly drawn `(state, goal)` pair at
/// each step of [`tabular_soft_q_learning`].
pub const RESTART_PROB: f64 = 0.1;

/// Stochastic soft Q-learning with the current softmax policy as behaviour.
///
/// Each step backs up every action at the visited `(s, g)` from one sampled
/// successor, `Q ← Q + lr (r + γ V(s') − Q)`, then moves with an action drawn
/// from `softmax(Q / α)`. With probability [`RESTART_PROB`] the walk
/// restarts at a uniform `(s, g)`. Returns the goal-major Q table.
pub fn tabular_soft_q_learning<R: Rng + ?Sized>(
    mdp: &TabularGoalMDP,
    alpha: f64,
    gamma: f64,
    steps: usize,
    lr: f64,
    rng: &mut R,
) -> Result<Vec<f64>, OracleError> {
    if !(alpha > 0.0) {
        return Err(OracleError::Temperature(alpha));
    }
    check(mdp, gamma, 1.0)?;
    let (ns, na, ng) = (mdp.n_states(), mdp.n_actions(), mdp.n_goals());
    let mut q = vec![0.0; ng * ns * na];
    let v_at = |q: &[f64], s: usize, gi: usize| soft_max(&q[(gi * ns + s) * na..(gi * ns + s + 1) * na], alpha);
    let mut s = rng.random_range(0..ns);
    let mut gi = rng.random_range(0..ng);
    for _ in 0..steps {
        for a in 0..na {
            let next = mdp.sample_next(s, a, rng);
            let target = mdp.reward(s, a, gi) + gamma * v_at(&q, next, gi);
            let cell = &mut q[(gi * ns + s) * na + a];
            *cell += lr * (target - *cell);
        }
        if rng.random::<f64>() < RESTART_PROB {
            s = rng.random_range(0..ns);
            gi = rng.random_range(0..ng);
            continue;
        }
        let row = &q[(gi * ns + s) * na..(gi * ns + s + 1) * na];
        let pi = softmax_policy(row, alpha);
        let mut u: f64 = rng.random();
        let mut a = na - 1;
        for (i, &p) in pi.iter().enumerate() {
            if u < p {
                a = i;
                break;
            }
            u -= p;
        }
        s = mdp.sample_next(s, a, rng);
    }
    Ok(q)
}

/// Uniform policy table in goal-major layout.
pub fn uniform_policy(mdp: &TabularGoalMDP) -> Vec<f64> {
    vec![1.0 / mdp.n_actions() as f64; mdp.n_goals() * mdp.n_states() * mdp.n_actions()]
}

/// Probability that the policy visits `goals()[gi]` within `horizon` steps
/// from `start`. The goal is absorbing; being there at step 0 counts.
pub fn exact_success_rate(
    mdp: &TabularGoalMDP,
    policy: &[f64],
    start: usize,
    gi: usize,
    horizon: usize,
) -> Result<f64, OracleError> {
    let (ns, na, ng) = (mdp.n_states(), mdp.n_actions(), mdp.n_goals());
    if policy.len() != ng * ns * na {
        return Err(OracleError::PolicyShape {
            expected: ng * ns * na,
            actual: policy.len(),
        });
    }
    let goal = *mdp.goals().get(gi).ok_or(OracleError::Goal(gi))?;
    if start == goal {
        return Ok(1.0);
    }
    let mut dist = vec![0.0; ns];
    dist[start] = 1.0;
    let mut hit = 0.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; ns];
        for (s, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for a in 0..na {
                let pa = policy[(gi * ns + s) * na + a];
                for &(n, p) in mdp.successors(s, a) {
                    next[n] += m * pa * p;
                }
            }
        }
        hit += next[goal];
        next[goal] = 0.0;
        dist = next;
    }
    Ok(hit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bandit(rewards: [f64; 2]) -> TabularGoalMDP {
        TabularGoalMDP::from_tables(
            vec![0],
            0,
            vec![vec![vec![(0, 1.0)], vec![(0, 1.0)]]],
            vec![vec![vec![rewards[0]], vec![rewards[1]]]],
        )
        .unwrap()
    }

    fn sup(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_two_action_values() {
        let sol = soft_value_iteration(&bandit([0.0, 0.0]), 1.0, 0.0, DEFAULT_TOL).unwrap();
        assert!((sol.v(0, 0) - 2f64.ln()).abs() < 1e-9);
        assert!((sol.pi(0, 0, 0) - 0.5).abs() < 1e-12);

        let sol = soft_value_iteration(&bandit([1.0, 0.0]), 1.0, 0.0, DEFAULT_TOL).unwrap();
        assert!((sol.v(0, 0) - (1f64.exp() + 1.0).ln()).abs() < 1e-9);
        assert!((sol.v(0, 0) - 1.3133).abs() < 1e-4);
        assert!((sol.pi(0, 0, 0) - 0.7311).abs() < 1e-4);
        assert!((sol.pi(0, 1, 0) - 0.2689).abs() < 1e-4);
    }

    #[test]
    fn solution_invariants_on_grid() {
        let mdp = TabularGoalMDP::grid(4, 3);
        let sol = soft_value_iteration(&mdp, 0.2, 0.9, DEFAULT_TOL).unwrap();
        for gi in 0..mdp.n_goals() {
            for s in 0..mdp.n_states() {
                let row: Vec<f64> = (0..5).map(|a| sol.q(s, a, gi)).collect();
                let lse = 0.2 * row.iter().map(|q| (q / 0.2).exp()).sum::<f64>().ln();
                assert!((sol.v(s, gi) - lse).abs() < 1e-10);
                let total: f64 = sol.pi_row(s, gi).iter().sum();
                assert!((total - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn hard_limit_recovered() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let soft = soft_value_iteration(&mdp, 1e-6, 0.95, DEFAULT_TOL).unwrap();
        let hard = hard_value_iteration(&mdp, 0.95, DEFAULT_TOL).unwrap();
        assert!(sup(&soft.q, &hard.q) < 1e-4);
        assert!(sup(&soft.v, &hard.v) < 1e-4);
    }

    #[test]
    fn residuals_shrink_monotonically() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let sol = soft_value_iteration(&mdp, 0.1, 0.95, DEFAULT_TOL).unwrap();
        assert!(sol.residuals.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(sol.iterations, sol.residuals.len());
    }

    #[test]
    fn rejects_bad_parameters() {
        let mdp = bandit([0.0, 0.0]);
        assert!(matches!(soft_value_iteration(&mdp, 0.0, 0.5, 1e-9), Err(OracleError::Temperature(_))));
        assert!(matches!(soft_value_iteration(&mdp, 1.0, 1.0, 1e-9), Err(OracleError::Discount(_))));
        assert!(matches!(soft_value_iteration(&mdp, 1.0, 0.5, 0.0), Err(OracleError::Tolerance(_))));
    }

    #[test]
    fn soft_policy_beats_random_distributions() {
        let mdp = TabularGoalMDP::grid(3, 3);
        let alpha = 0.3;
        let sol = soft_value_iteration(&mdp, alpha, 0.9, DEFAULT_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let objective = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(p, q)| p * q).sum::<f64>() + alpha * entropy(p);
        for (s, gi) in [(0, 8), (4, 4), (2, 6)] {
            let q: Vec<f64> = (0..5).map(|a| sol.q(s, a, gi)).collect();
            let best = objective(sol.pi_row(s, gi), &q);
            assert!((best - sol.v(s, gi)).abs() < 1e-9);
            for _ in 0..10_000 {
                let raw: Vec<f64> = (0..5).map(|_| -rng.random::<f64>().ln()).collect();
                let total: f64 = raw.iter().sum();
                let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
                assert!(objective(&p, &q) <= best + 1e-12);
            }
        }
    }

    #[test]
    fn entropy_grows_with_temperature() {
        let mdp = TabularGoalMDP::grid(4, 4);
        let sols: Vec<_> = [0.03, 0.05, 0.1, 0.3, 1.0]
            .iter()
            .map(|&a| soft_value_iteration(&mdp, a, 0.95, DEFAULT_TOL).unwrap())
            .collect();
        for gi in 0..mdp.n_goals() {
            for s in 0..mdp.n_states() {
                for w in sols.windows(2) {
                    assert!(w[1].entropy(s, gi) >= w[0].entropy(s, gi) - 1e-9, "s={s} g={gi}");
                }
            }
        }
    }

    #[test]
    fn q_learning_one_step_problem() {
        let mdp = TabularGoalMDP::grid(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let q = tabular_soft_q_learning(&mdp, 0.1, 0.0, 20_000, 0.9, &mut rng).unwrap();
        for gi in 0..9 {
            for s in 0..9 {
                for a in 0..5 {
                    assert!((q[(gi * 9 + s) * 5 + a] - mdp.reward(s, a, gi)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn q_learning_matches_fixed_point() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let oracle = soft_value_iteration(&mdp, 0.1, 0.95, DEFAULT_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = tabular_soft_q_learning(&mdp, 0.1, 0.95, 600_000, 0.5, &mut rng).unwrap();
        let err = sup(&q, &oracle.q);
        assert!(err < 1e-2, "max |Q - Q*| = {err}");
    }

    #[test]
    fn q_learning_is_seeded() {
        let mdp = TabularGoalMDP::grid(3, 3);
        let a = tabular_soft_q_learning(&mdp, 0.1, 0.9, 500, 0.3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = tabular_soft_q_learning(&mdp, 0.1, 0.9, 500, 0.3, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn success_rate_examples() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let uniform = uniform_policy(&mdp);
        assert_eq!(exact_success_rate(&mdp, &uniform, 0, 0, 10).unwrap(), 1.0);
        assert_eq!(exact_success_rate(&mdp, &uniform, 0, 12, 1).unwrap(), 0.0);
        // adjacent goal in one step: only Right reaches it
        assert!((exact_success_rate(&mdp, &uniform, 0, 1, 1).unwrap() - 0.2).abs() < 1e-15);
        assert!(exact_success_rate(&mdp, &uniform[1..], 0, 1, 1).is_err());
    }

    #[test]
    fn soft_optimal_dominates_uniform() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let sol = soft_value_iteration(&mdp, 0.1, 0.95, DEFAULT_TOL).unwrap();
        let uniform = uniform_policy(&mdp);
        for gi in 0..25 {
            for start in 0..25 {
                let soft = exact_success_rate(&mdp, &sol.pi, start, gi, 12).unwrap();
                let unif = exact_success_rate(&mdp, &uniform, start, gi, 12).unwrap();
                assert!(soft >= unif - 1e-12, "start={start} goal={gi}: {soft} < {unif}");
            }
        }
    }
}
