//! Benchmark fixtures sized like a PointReach training step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sher_core::agents::{synthetic_batch, BatchTensors, DdpgAgent, DdpgConfig, Normalizer, SacAgent, SacConfig};
use sher_core::diffcore::{Mlp, OutputActivation, Tensor};

pub const OBS_DIM: usize = 4;
pub const GOAL_DIM: usize = 2;
pub const ACTION_DIM: usize = 2;
pub const STATE_DIM: usize = OBS_DIM + GOAL_DIM;

pub fn batch(size: usize, seed: u64) -> BatchTensors {
    synthetic_batch(size, STATE_DIM, ACTION_DIM, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn sac_agent(seed: u64) -> SacAgent {
    let norm = Normalizer::new(OBS_DIM, GOAL_DIM, true);
    SacAgent::new(norm, ACTION_DIM, SacConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("default config is valid")
}

pub fn ddpg_agent(seed: u64) -> DdpgAgent {
    let norm = Normalizer::new(OBS_DIM, GOAL_DIM, true);
    DdpgAgent::new(norm, ACTION_DIM, DdpgConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("default config is valid")
}

/// A critic-shaped network: `state ‖ action -> 1`.
pub fn critic(hidden: &[usize], seed: u64) -> Mlp {
    let mut sizes = vec![STATE_DIM + ACTION_DIM];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Mlp::new(&sizes, OutputActivation::Linear, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn critic_input(rows: usize, seed: u64) -> Tensor {
    let b = batch(rows, seed);
    b.state_actions()
}
