//! Per-BS DDPG: exploration, replay, Bellman regression of the critic,
//! actor ascent through the critic's action gradient, soft target tracking.

mod agent;
pub mod checkpoint;
mod replay;

pub use agent::{action_to_beamformer, network_input, project_action, project_action_vjp, Agent, DdpgConfig, TrainStats};
pub use replay::{ReplayBuffer, Transition};
