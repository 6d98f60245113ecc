use crate::diffcore::Tensor;
use crate::envs::GoalObservation;
use crate::replay::EpisodeRecord;

/// Per-dimension running sums.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    count: f64,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            sum: vec![0.0; dim],
            sumsq: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.len()
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for ((s, q), &v) in self.sum.iter_mut().zip(&mut self.sumsq).zip(x) {
            *s += v;
            *q += v * v;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![0.0; self.dim()];
        }
        self.sum.iter().map(|s| s / self.count).collect()
    }

    /// Standard deviation floored at `eps`.
    pub fn std(&self, eps: f64) -> Vec<f64> {
        if self.count == 0.0 {
            return vec![1.0; self.dim()];
        }
        self.sum
            .iter()
            .zip(&self.sumsq)
            .map(|(s, q)| {
                let m = s / self.count;
                (q / self.count - m * m).max(eps * eps).sqrt()
            })
            .collect()
    }

    pub(crate) fn to_tensors(&self) -> [Tensor; 3] {
        [
            Tensor::scalar(self.count),
            Tensor::matrix(1, self.dim(), self.sum.clone()),
            Tensor::matrix(1, self.dim(), self.sumsq.clone()),
        ]
    }

    pub(crate) fn from_tensors(count: &Tensor, sum: &Tensor, sumsq: &Tensor) -> Option<Self> {
        (count.len() == 1 && sum.len() == sumsq.len()).then(|| Self {
            count: count.item(),
            sum: sum.data().to_vec(),
            sumsq: sumsq.data().to_vec(),
        })
    }
}

/// Maps `(obs, goal)` to `clip((x − mean) / std, ±clip)` per part, with
/// statistics frozen between [`Normalizer::observe_episode`] calls. When
/// disabled it only concatenates.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub(crate) obs: RunningStats,
    pub(crate) goal: RunningStats,
    pub(crate) enabled: bool,
    clip: f64,
    eps: f64,
    cache: [Vec<f64>; 4],
}

impl Normalizer {
    pub const CLIP: f64 = 5.0;
    pub const EPS: f64 = 0.01;

    pub fn new(obs_dim: usize, goal_dim: usize, enabled: bool) -> Self {
        Self::from_stats(RunningStats::new(obs_dim), RunningStats::new(goal_dim), enabled)
    }

    pub(crate) fn from_stats(obs: RunningStats, goal: RunningStats, enabled: bool) -> Self {
        let mut n = Self {
            obs,
            goal,
            enabled,
            clip: Self::CLIP,
            eps: Self::EPS,
            cache: Default::default(),
        };
        n.refresh();
        n
    }

    fn refresh(&mut self) {
        self.cache = [
            self.obs.mean(),
            self.obs.std(self.eps),
            self.goal.mean(),
            self.goal.std(self.eps),
        ];
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.dim()
    }

    pub fn goal_dim(&self) -> usize {
        self.goal.dim()
    }

    /// Width of a normalised `obs ‖ goal` row.
    pub fn state_dim(&self) -> usize {
        self.obs.dim() + self.goal.dim()
    }

    /// Observations of `s_0 .. s_T`; achieved and desired goals, since
    /// relabelled goals are drawn from achieved ones.
    pub fn observe_episode(&mut self, episode: &EpisodeRecord) {
        let trs = episode.transitions();
        self.obs.push(&trs[0].obs.observation);
        for tr in trs {
            self.obs.push(&tr.next_obs.observation);
            self.goal.push(&tr.obs.desired_goal);
        }
        for g in episode.achieved_trace() {
            self.goal.push(g);
        }
        self.refresh();
    }

    pub fn normalize_into(&self, obs: &GoalObservation, out: &mut Vec<f64>) {
        if !self.enabled {
            out.extend_from_slice(&obs.observation);
            out.extend_from_slice(&obs.desired_goal);
            return;
        }
        let [om, os, gm, gs] = &self.cache;
        let c = self.clip;
        out.extend(obs.observation.iter().zip(om).zip(os).map(|((x, m), s)| ((x - m) / s).clamp(-c, c)));
        out.extend(obs.desired_goal.iter().zip(gm).zip(gs).map(|((x, m), s)| ((x - m) / s).clamp(-c, c)));
    }

    pub fn state(&self, obs: &GoalObservation) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.state_dim());
        self.normalize_into(obs, &mut out);
        out
    }
}
