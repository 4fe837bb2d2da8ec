//! Federated deep reinforcement learning for terahertz beam search.
//!
//! Each base station runs a DDPG agent that maps its partially estimated
//! serving channel and fed-back SINR to a beamforming vector. An edge server
//! periodically averages the agents' actor/critic weights (fully, or from a
//! sparse top-|delta| subset). Classical beamformers (MRT, ZF, MMSE, random,
//! codebook DQN) serve as references.
//!
//! Module map:
//! - [`channel`]: THz channel realizations and the limited-CSI mask.
//! - [`env`]: the K-cell network, SINR / rate evaluation and the RL step.
//! - [`nn`]: dense networks with exact backprop, Adam, binary parameter layout.
//! - [`ddpg`]: one base station's learning loop.
//! - [`fed`]: edge-server aggregation and the upload wire format.
//! - [`baselines`]: non-learning and non-federated references.
//! - [`experiment`]: configuration, the epoch loop, Monte Carlo and sweeps.

pub mod baselines;
pub mod channel;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod experiment;
pub mod fed;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
pub use num_complex::Complex64;
