//! Reference beamformers. The analytic ones (MRT, ZF, MMSE) are granted the
//! full cross-channel CSI; the codebook DQN learns from the same state and
//! reward as the DDPG agents but without federation.

mod dqn;
mod linear;

pub use dqn::{epsilon_greedy, Codebook, DqnAgent, DqnConfig, DqnTransition};
pub use linear::{mmse_beamformers, mmse_direction, mrt_beamformer, random_beams, zf_beamformers, PINV_TOL};
