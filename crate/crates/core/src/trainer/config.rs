use std::path::{Path, PathBuf};

use super::TrainError;
use crate::agents::{AgentKind, DdpgConfig, SacConfig};
use crate::envs::EnvKind;
use crate::replay::{RelabelStrategy, ReplayConfig, RewardRule};

/// Everything that determines a training run apart from the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub agent: AgentKind,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub mean_reg: f64,
    pub strategy: RelabelStrategy,
    pub k: f64,
    pub epochs: usize,
    pub episodes_per_epoch: usize,
    pub updates_per_epoch: usize,
    pub eval_episodes: usize,
    /// Replay capacity in episodes.
    pub buffer_capacity: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub normalize: bool,
    pub reward_rule: RewardRule,
    /// Write measured seconds to `wall_s`; otherwise the column is 0 so
    /// repeated runs produce identical files.
    pub record_wall_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::PointReach,
            agent: AgentKind::Sher,
            alpha: 0.05,
            gamma: 0.98,
            rho: 0.95,
            lr: 1e-3,
            batch_size: 128,
            hidden: vec![64, 64],
            log_std_min: -20.0,
            log_std_max: 2.0,
            mean_reg: 0.0,
            strategy: RelabelStrategy::Future,
            k: 4.0,
            epochs: 150,
            episodes_per_epoch: 16,
            updates_per_epoch: 40,
            eval_episodes: 20,
            buffer_capacity: 10_000,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs"),
            normalize: true,
            reward_rule: RewardRule::NextState,
            record_wall_time: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, TrainError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| TrainError::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, TrainError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(TrainError::Config(format!("{key}: expected a boolean, got '{value}'"))),
    }
}

pub fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, TrainError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Keys accepted by [`RunConfig::set`] and written to manifests.
    pub const KEYS: &'static [&'static str] = &[
        "env",
        "agent",
        "alpha",
        "gamma",
        "rho",
        "lr",
        "batch_size",
        "hidden",
        "log_std_min",
        "log_std_max",
        "mean_reg",
        "strategy",
        "k",
        "epochs",
        "episodes_per_epoch",
        "updates_per_epoch",
        "eval_episodes",
        "buffer_capacity",
        "seeds",
        "out",
        "normalize",
        "reward_rule",
        "wall_time",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let value = value.trim();
        match key {
            "env" => self.env = parse(key, value)?,
            "agent" => self.agent = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "log_std_min" => self.log_std_min = parse(key, value)?,
            "log_std_max" => self.log_std_max = parse(key, value)?,
            "mean_reg" => self.mean_reg = parse(key, value)?,
            "strategy" => self.strategy = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "episodes_per_epoch" => self.episodes_per_epoch = parse(key, value)?,
            "updates_per_epoch" => self.updates_per_epoch = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, value)?,
            "seeds" | "seed" => self.seeds = parse_list(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "normalize" => self.normalize = parse_bool(key, value)?,
            "reward_rule" => {
                self.reward_rule = match value {
                    "next" => RewardRule::NextState,
                    "current" => RewardRule::CurrentState,
                    _ => return Err(TrainError::Config(format!("reward_rule: expected next or current, got '{value}'"))),
                }
            }
            "wall_time" => self.record_wall_time = parse_bool(key, value)?,
            _ => return Err(TrainError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "env" => self.env.to_string(),
            "agent" => self.agent.to_string(),
            "alpha" => self.alpha.to_string(),
            "gamma" => self.gamma.to_string(),
            "rho" => self.rho.to_string(),
            "lr" => self.lr.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "hidden" => join(&self.hidden),
            "log_std_min" => self.log_std_min.to_string(),
            "log_std_max" => self.log_std_max.to_string(),
            "mean_reg" => self.mean_reg.to_string(),
            "strategy" => self.strategy.to_string(),
            "k" => self.k.to_string(),
            "epochs" => self.epochs.to_string(),
            "episodes_per_epoch" => self.episodes_per_epoch.to_string(),
            "updates_per_epoch" => self.updates_per_epoch.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "buffer_capacity" => self.buffer_capacity.to_string(),
            "seeds" => join(&self.seeds),
            "out" => self.out_dir.display().to_string(),
            "normalize" => self.normalize.to_string(),
            "reward_rule" => match self.reward_rule {
                RewardRule::NextState => "next".into(),
                RewardRule::CurrentState => "current".into(),
            },
            "wall_time" => self.record_wall_time.to_string(),
            _ => return None,
        })
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_str(&mut self, text: &str) -> Result<(), TrainError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainError::Config(format!("line {}: expected key=value, got '{line}'", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), TrainError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_str(&text)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.env == EnvKind::Grid {
            return fail("the grid environment is tabular; use oracle-check");
        }
        if self.seeds.is_empty() {
            return fail("seed list is empty");
        }
        if self.episodes_per_epoch == 0 || self.updates_per_epoch == 0 || self.eval_episodes == 0 {
            return fail("episode, update and evaluation counts must be positive");
        }
        if self.buffer_capacity == 0 {
            return fail("buffer capacity must be positive");
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return fail("k must be a non-negative number");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return fail("hidden widths must be positive");
        }
        match self.agent {
            AgentKind::Sher => self.sac().validate(),
            AgentKind::HerDdpg => self.ddpg().validate(),
        }
        .map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn sac(&self) -> SacConfig {
        SacConfig {
            alpha: self.alpha,
            gamma: self.gamma,
            rho: self.rho,
            batch_size: self.batch_size,
            lr: self.lr,
            hidden: self.hidden.clone(),
            log_std_min: self.log_std_min,
            log_std_max: self.log_std_max,
            mean_reg: self.mean_reg,
        }
    }

    pub fn ddpg(&self) -> DdpgConfig {
        DdpgConfig {
            gamma: self.gamma,
            rho: self.rho,
            batch_size: self.batch_size,
            lr_actor: self.lr,
            lr_critic: self.lr,
            hidden: self.hidden.clone(),
            ..DdpgConfig::default()
        }
    }

    pub fn replay(&self, horizon: usize, delta: f64) -> ReplayConfig {
        ReplayConfig {
            capacity: self.buffer_capacity,
            horizon,
            strategy: self.strategy,
            k: self.k,
            delta,
            reward_rule: self.reward_rule,
        }
    }

    /// `key=value` lines for the run identity. The output directory is left
    /// out so relocated runs stay comparable.
    pub fn manifest(&self, seed: Option<u64>) -> String {
        let mut out = String::new();
        for key in Self::KEYS.iter().filter(|&&k| k != "out") {
            out.push_str(&format!("{key}={}\n", self.get(key).unwrap()));
        }
        if let Some(s) = seed {
            out.push_str(&format!("seed={s}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.epochs, cfg.episodes_per_epoch, cfg.updates_per_epoch), (150, 16, 40));
        assert_eq!(cfg.seeds.len(), 5);
        assert_eq!(cfg.sac().alpha, 0.05);
    }

    #[test]
    fn manifest_reloads_to_the_same_config() {
        let mut cfg = RunConfig::default();
        cfg.apply_str("env = point-push\nagent=her-ddpg\nstrategy=episode\nk=2\nhidden=32,16\nseeds=3,9\nreward_rule=current\n")
            .unwrap();
        let mut back = RunConfig {
            out_dir: "elsewhere".into(),
            ..RunConfig::default()
        };
        back.apply_str(&cfg.manifest(None)).unwrap();
        back.out_dir = cfg.out_dir.clone();
        assert_eq!(back, cfg);
        assert!(!cfg.manifest(Some(3)).contains("out="));
        assert!(cfg.manifest(Some(3)).ends_with("seed=3\n"));
    }

    #[test]
    fn every_key_round_trips() {
        let cfg = RunConfig::default();
        for key in RunConfig::KEYS {
            let mut c = RunConfig::default();
            c.set(key, &cfg.get(key).unwrap()).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("nonsense", "1"), Err(TrainError::Config(_))));
        assert!(cfg.set("epochs", "-3").is_err());
        assert!(cfg.apply_str("epochs").is_err());
        for (k, v) in [("seeds", ""), ("updates_per_epoch", "0"), ("env", "grid"), ("alpha", "0"), ("gamma", "1")] {
            let mut c = RunConfig::default();
            let r = c.set(k, v).and_then(|_| c.validate());
            assert_eq!(r.map_err(|e| e.exit_code()), Err(2), "{k}={v}");
        }
    }
}
