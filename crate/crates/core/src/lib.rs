//! Soft hindsight experience replay: maximum-entropy goal-conditioned
//! actor-critic with hindsight goal relabelling, a deterministic HER-DDPG
//! baseline, and exact tabular soft-value solvers used as ground truth.

pub mod agents;
pub mod diffcore;
pub mod envs;
pub mod oracle;
pub mod replay;
pub mod trainer;
