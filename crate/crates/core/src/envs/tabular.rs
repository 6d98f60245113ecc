use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EnvError;

/// Finite goal-conditioned MDP.
///
/// Transitions do not depend on the goal. `reward(s, a, g)` is an explicit
/// table; for grids it is `0` when the successor equals the goal cell and
/// `-1` otherwise (the sparse reward with exact matching).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularGoalMDP {
    n_states: usize,
    n_actions: usize,
    goals: Vec<usize>,
    start: usize,
    // successor distribution per (s, a), flattened as s * n_actions + a
    transitions: Vec<Vec<(usize, f64)>>,
    // reward per (s, a, goal index), flattened
    rewards: Vec<f64>,
}

/// Moves on a grid; moving into a wall leaves the agent in place.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridAction {
    Stay = 0,
    Up = 1,
    Down = 2,
    Left = 3,
    Right = 4,
}

impl GridAction {
    pub const ALL: [GridAction; 5] = [
        GridAction::Stay,
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
    ];
}

impl TabularGoalMDP {
    /// `transitions[s][a]` lists `(next, prob)`; `rewards[s][a][gi]` is the
    /// reward for goal `goals[gi]`.
    pub fn from_tables(
        goals: Vec<usize>,
        start: usize,
        transitions: Vec<Vec<Vec<(usize, f64)>>>,
        rewards: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, EnvError> {
        let n_states = transitions.len();
        let n_actions = transitions.first().map_or(0, Vec::len);
        if n_states == 0 || n_actions == 0 {
            return Err(EnvError::InvalidMdp("no states or actions".into()));
        }
        if goals.is_empty() {
            return Err(EnvError::InvalidMdp("goal set is empty".into()));
        }
        if let Some(&g) = goals.iter().find(|&&g| g >= n_states) {
            return Err(EnvError::InvalidMdp(format!("goal {g} is not a state")));
        }
        if start >= n_states {
            return Err(EnvError::InvalidMdp(format!("start {start} is not a state")));
        }
        let mut flat_t = Vec::with_capacity(n_states * n_actions);
        for (s, row) in transitions.into_iter().enumerate() {
            if row.len() != n_actions {
                return Err(EnvError::InvalidMdp(format!("state {s} has {} actions", row.len())));
            }
            for (a, dist) in row.into_iter().enumerate() {
                let total: f64 = dist.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-12 || dist.iter().any(|&(n, p)| n >= n_states || p < 0.0) {
                    return Err(EnvError::InvalidMdp(format!(
                        "transition row ({s}, {a}) is not a distribution (sums to {total})"
                    )));
                }
                flat_t.push(dist);
            }
        }
        let mut flat_r = Vec::with_capacity(n_states * n_actions * goals.len());
        if rewards.len() != n_states {
            return Err(EnvError::InvalidMdp("reward table has wrong state count".into()));
        }
        for per_state in rewards {
            if per_state.len() != n_actions {
                return Err(EnvError::InvalidMdp("reward table has wrong action count".into()));
            }
            for per_action in per_state {
                if per_action.len() != goals.len() {
                    return Err(EnvError::InvalidMdp("reward table has wrong goal count".into()));
                }
                flat_r.extend(per_action);
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            goals,
            start,
            transitions: flat_t,
            rewards: flat_r,
        })
    }

    /// `width x height` grid, five deterministic actions, every cell a goal,
    /// start in cell 0 (top-left corner).
    pub fn grid(width: usize, height: usize) -> Self {
        let n = width * height;
        let next = |s: usize, a: GridAction| -> usize {
            let (x, y) = (s % width, s / width);
            let (nx, ny) = match a {
                GridAction::Stay => (x, y),
                GridAction::Up => (x, y.saturating_sub(1)),
                GridAction::Down => (x, (y + 1).min(height - 1)),
                GridAction::Left => (x.saturating_sub(1), y),
                GridAction::Right => ((x + 1).min(width - 1), y),
            };
            ny * width + nx
        };
        let transitions = (0..n)
            .map(|s| GridAction::ALL.iter().map(|&a| vec![(next(s, a), 1.0)]).collect())
            .collect();
        let rewards = (0..n)
            .map(|s| {
                GridAction::ALL
                    .iter()
                    .map(|&a| (0..n).map(|g| if next(s, a) == g { 0.0 } else { -1.0 }).collect())
                    .collect()
            })
            .collect();
        Self::from_tables((0..n).collect(), 0, transitions, rewards).expect("grid construction is valid")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn goals(&self) -> &[usize] {
        &self.goals
    }

    pub fn n_goals(&self) -> usize {
        self.goals.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    /// Reward for goal index `gi` (an index into `goals()`).
    pub fn reward(&self, s: usize, a: usize, gi: usize) -> f64 {
        self.rewards[(s * self.n_actions + a) * self.goals.len() + gi]
    }

    /// Fixed start state and a uniformly drawn goal index.
    pub fn reset(&self, seed: u64) -> (usize, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (self.start, rng.random_range(0..self.goals.len()))
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let dist = self.successors(s, a);
        if dist.len() == 1 {
            return dist[0].0;
        }
        let mut u: f64 = rng.random();
        for &(n, p) in dist {
            if u < p {
                return n;
            }
            u -= p;
        }
        dist.last().unwrap().0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn grid_rows_are_distributions() {
        let mdp = TabularGoalMDP::grid(5, 5);
        for s in 0..25 {
            for a in 0..5 {
                let total: f64 = mdp.successors(s, a).iter().map(|x| x.1).sum();
                assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn grid_moves_and_walls() {
        let mdp = TabularGoalMDP::grid(5, 5);
        assert_eq!(mdp.successors(0, GridAction::Up as usize)[0].0, 0);
        assert_eq!(mdp.successors(0, GridAction::Left as usize)[0].0, 0);
        assert_eq!(mdp.successors(0, GridAction::Right as usize)[0].0, 1);
        assert_eq!(mdp.successors(0, GridAction::Down as usize)[0].0, 5);
        assert_eq!(mdp.successors(12, GridAction::Stay as usize)[0].0, 12);
        assert_eq!(mdp.reward(0, GridAction::Right as usize, 1), 0.0);
        assert_eq!(mdp.reward(0, GridAction::Right as usize, 2), -1.0);
    }

    #[test]
    fn reset_start_fixed_goals_cover_grid() {
        let mdp = TabularGoalMDP::grid(5, 5);
        let mut seen = BTreeSet::new();
        for seed in 0..2000 {
            let (s, g) = mdp.reset(seed);
            assert_eq!(s, 0);
            seen.insert(g);
        }
        assert_eq!(seen.len(), 25);
    }

    #[test]
    fn rejects_bad_tables() {
        let t = vec![vec![vec![(0, 0.5)]]];
        let r = vec![vec![vec![0.0]]];
        assert!(TabularGoalMDP::from_tables(vec![0], 0, t, r.clone()).is_err());
        let t = vec![vec![vec![(0, 1.0)]]];
        assert!(TabularGoalMDP::from_tables(vec![], 0, t.clone(), r.clone()).is_err());
        assert!(TabularGoalMDP::from_tables(vec![0], 0, t, r).is_ok());
    }
}
