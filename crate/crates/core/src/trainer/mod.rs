//! Outer training loop, the train/test success gap and run reports.
//!
//! Each epoch collects stochastic training rollouts, stores them, runs a
//! fixed number of updates, then evaluates the deterministic policy head on
//! goals drawn from seeds that training never sees. `S_train` is the
//! per-epoch fraction of training rollouts whose final step succeeds.

mod config;
mod report;
mod run;

pub use config::{parse_list, RunConfig};
pub use report::{
    compare_agents, delta_s, format_delta_s_table, median, read_progress_csv, sweep_alpha, write_progress_csv,
    method_label, AgentComparison, AlphaSummary, AlphaSweep, Comparison, EpochAggregate, EpochReport, CSV_HEADER,
};
pub use run::{evaluate, rollout, run_training, train_seed, train_seed_on, SeedRun};

use crate::agents::AgentError;
use crate::diffcore::DiffError;
use crate::envs::EnvError;
use crate::replay::ReplayError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Agent(AgentError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl TrainError {
    /// Process exit status: 2 for configuration, 3 for numerical aborts,
    /// 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            TrainError::Config(_) => 2,
            TrainError::Numerical(_) => 3,
            _ => 1,
        }
    }
}

impl From<AgentError> for TrainError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::NonFinite { .. } | AgentError::Diff(DiffError::NonFiniteGradient { .. }) => {
                TrainError::Numerical(e.to_string())
            }
            AgentError::Config(m) => TrainError::Config(m),
            AgentError::Io(io) => TrainError::Io(io.to_string()),
            other => TrainError::Agent(other),
        }
    }
}

impl From<std::io::Error> for TrainError {
    fn from(e: std::io::Error) -> Self {
        TrainError::Io(e.to_string())
    }
}

impl From<csv::Error> for TrainError {
    fn from(e: csv::Error) -> Self {
        TrainError::Io(e.to_string())
    }
}
