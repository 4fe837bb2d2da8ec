//! Agent checkpoints: a manifest record followed by the four networks in
//! the [`crate::nn::codec`] layout.
//!
//! ```text
//! magic        8 bytes  "THZCKPT1"
//! agent id     u32
//! epoch        u32
//! noise sigma  f64
//! actor, critic, target actor, target critic   (THZMLP01 records)
//! ```

use crate::ddpg::{Agent, DdpgConfig};
use crate::error::{Error, Result};
use crate::nn::codec::{self, Reader};
use crate::nn::Mlp;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"THZCKPT1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub agent_id: u32,
    pub epoch: u32,
    pub noise_sigma: f64,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
}

impl Checkpoint {
    pub fn capture(agent: &Agent, epoch: u32) -> Self {
        Self {
            agent_id: agent.id as u32,
            epoch,
            noise_sigma: agent.noise_sigma,
            actor: agent.actor.clone(),
            critic: agent.critic.clone(),
            target_actor: agent.target_actor.clone(),
            target_critic: agent.target_critic.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        out.extend_from_slice(&self.agent_id.to_le_bytes());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&self.noise_sigma.to_le_bytes());
        for net in [&self.actor, &self.critic, &self.target_actor, &self.target_critic] {
            codec::encode(net, &mut out);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.expect_magic(CHECKPOINT_MAGIC)?;
        let agent_id = r.u32()?;
        let epoch = r.u32()?;
        let noise_sigma = r.f64()?;
        let actor = codec::decode_from(&mut r)?;
        let critic = codec::decode_from(&mut r)?;
        let target_actor = codec::decode_from(&mut r)?;
        let target_critic = codec::decode_from(&mut r)?;
        if r.position() != buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.position())));
        }
        Ok(Self { agent_id, epoch, noise_sigma, actor, critic, target_actor, target_critic })
    }

    /// Rebuild an agent with an empty replay memory and fresh optimizers.
    pub fn restore(&self, num_antennas: usize, config: DdpgConfig) -> Result<Agent> {
        let mut agent = Agent::from_networks(
            self.agent_id as usize,
            num_antennas,
            config,
            self.actor.clone(),
            self.critic.clone(),
        )?;
        if !self.target_actor.same_architecture(&self.actor) || !self.target_critic.same_architecture(&self.critic) {
            return Err(Error::Architecture("target networks differ from main networks".into()));
        }
        agent.target_actor = self.target_actor.clone();
        agent.target_critic = self.target_critic.clone();
        agent.noise_sigma = self.noise_sigma;
        Ok(agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn checkpoint_round_trip() {
        let cfg = DdpgConfig { actor_hidden: vec![6], critic_hidden: vec![5, 4], ..DdpgConfig::default() };
        let mut agent = Agent::new(3, 4, cfg.clone(), &mut seed::rng(1)).unwrap();
        agent.noise_sigma = 0.25;
        agent.target_actor.params_mut()[0] = 9.0;
        let ck = Checkpoint::capture(&agent, 120);
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..8], b"THZCKPT1");
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &120u32.to_le_bytes());
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let restored = back.restore(4, cfg).unwrap();
        assert_eq!(restored.target_actor, agent.target_actor);
        assert_eq!(restored.noise_sigma, 0.25);
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }
}
