use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{steering_vector, ChannelParams};
use crate::ddpg::{network_input, ReplayBuffer};
use crate::env::BsState;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Mlp};

/// Unit-norm steering beams whose angles uniformly quantize
/// `[-pi/2, pi/2]`: beam `q` points at `-pi/2 + pi (q + 1/2) / Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn steering(size: usize, params: &ChannelParams) -> Result<Self> {
        if size == 0 {
            return Err(Error::Config("codebook size must be >= 1".into()));
        }
        let n = params.num_antennas;
        let scale = (n as f64).sqrt();
        let beams = (0..size)
            .map(|q| {
                let theta = -PI / 2.0 + PI * (q as f64 + 0.5) / size as f64;
                steering_vector(theta, n, params.antenna_spacing, params.wavelength())
                    .into_iter()
                    .map(|z| z * scale)
                    .collect()
            })
            .collect();
        Ok(Self { beams })
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }
}

/// With probability `epsilon` a uniform index, otherwise the arg-max (lowest
/// index on ties).
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        return rng.random_range(0..q_values.len());
    }
    let mut best = 0;
    for (i, &q) in q_values.iter().enumerate() {
        if q > q_values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub updates_per_epoch: usize,
    pub reward_normalization: bool,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![100, 70],
            lr: 1e-3,
            gamma: 0.9,
            tau: 0.01,
            buffer_capacity: 10,
            batch_size: 5,
            epsilon: 1.0,
            epsilon_decay: 0.98,
            epsilon_min: 0.01,
            updates_per_epoch: 4,
            reward_normalization: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnTransition {
    pub state: BsState,
    pub action: usize,
    pub reward: f64,
    pub next_state: BsState,
}

/// Codebook deep-Q learner: one Q-value per beam, epsilon-greedy
/// selection, one-step max-Q targets from a soft-updated target network.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub config: DqnConfig,
    pub codebook: Codebook,
    pub qnet: Mlp,
    pub target: Mlp,
    opt: Adam,
    pub buffer: ReplayBuffer<DqnTransition>,
    pub epsilon: f64,
    reward_scale: f64,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(num_antennas: usize, codebook: Codebook, config: DqnConfig, rng: &mut R) -> Result<Self> {
        if !(0.0..1.0).contains(&config.gamma) || config.batch_size == 0 || config.buffer_capacity == 0 {
            return Err(Error::Config("invalid DQN configuration".into()));
        }
        let mut sizes = vec![BsState::dim(num_antennas)];
        sizes.extend(&config.hidden);
        sizes.push(codebook.len());
        let qnet = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng)?;
        Ok(Self {
            opt: Adam::for_net(AdamConfig::with_lr(config.lr), &qnet),
            target: qnet.clone(),
            qnet,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            epsilon: config.epsilon,
            reward_scale: 0.0,
            codebook,
            config,
        })
    }

    pub fn q_values(&self, state: &BsState) -> Result<Vec<f64>> {
        self.qnet.forward(&network_input(state))
    }

    pub fn select<R: Rng + ?Sized>(&self, state: &BsState, explore: bool, rng: &mut R) -> Result<usize> {
        let q = self.q_values(state)?;
        Ok(epsilon_greedy(&q, if explore { self.epsilon } else { 0.0 }, rng))
    }

    pub fn beam(&self, index: usize) -> &[Complex64] {
        &self.codebook.beams[index]
    }

    pub fn remember(&mut self, t: DqnTransition) {
        self.reward_scale = self.reward_scale.max(t.reward.abs());
        self.buffer.push(t);
    }

    fn scale(&self) -> f64 {
        if self.config.reward_normalization && self.reward_scale > 0.0 {
            self.reward_scale
        } else {
            1.0
        }
    }

    /// One minibatch regression of `Q(s, a)` onto `r + gamma max_a' Q'(s', a')`.
    /// Returns the pre-update loss, or `None` while the buffer is short.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<f64>> {
        let b = self.config.batch_size;
        if self.buffer.len() < b {
            return Ok(None);
        }
        let batch: Vec<DqnTransition> = self.buffer.sample(rng, b).into_iter().cloned().collect();
        let scale = self.scale();
        let inv = 1.0 / b as f64;
        let mut grad = vec![0.0; self.qnet.num_params()];
        let mut loss = 0.0;
        for t in &batch {
            let next = self.target.forward(&network_input(&t.next_state))?;
            let max_next = next.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let y = t.reward / scale + self.config.gamma * max_next;
            let trace = self.qnet.forward_trace(&network_input(&t.state))?;
            let err = y - trace.output()[t.action];
            loss += err * err * inv;
            let mut upstream = vec![0.0; self.codebook.len()];
            upstream[t.action] = -2.0 * err * inv;
            let g = self.qnet.backward_from(&trace, &upstream)?;
            grad.iter_mut().zip(&g.params).for_each(|(a, b)| *a += b);
        }
        self.opt.step(&mut self.qnet, &grad)?;
        self.target.soft_update(&self.qnet, self.config.tau)?;
        Ok(Some(loss))
    }

    pub fn decay_epsilon(&mut self) {
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_min);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelVector;
    use crate::seed;

    #[test]
    fn codebook_beams_have_unit_norm() {
        let cb = Codebook::steering(16, &ChannelParams::thz_default(8)).unwrap();
        assert_eq!(cb.len(), 16);
        for b in &cb.beams {
            let n: f64 = b.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert!(Codebook::steering(0, &ChannelParams::thz_default(8)).is_err());
    }

    #[test]
    fn greedy_and_uniform_selection() {
        assert_eq!(epsilon_greedy(&[0.1, 0.9, 0.3], 0.0, &mut seed::rng(1)), 1);
        assert_eq!(epsilon_greedy(&[0.5, 0.5, 0.1], 0.0, &mut seed::rng(1)), 0);
        let picks: Vec<usize> = {
            let mut rng = seed::rng(2);
            (0..3000).map(|_| epsilon_greedy(&[0.0, 9.0, 0.0], 1.0, &mut rng)).collect()
        };
        let again: Vec<usize> = {
            let mut rng = seed::rng(2);
            (0..3000).map(|_| epsilon_greedy(&[0.0, 9.0, 0.0], 1.0, &mut rng)).collect()
        };
        assert_eq!(picks, again);
        for i in 0..3 {
            let n = picks.iter().filter(|&&p| p == i).count();
            assert!((800..1200).contains(&n), "index {i}: {n}");
        }
    }

    #[test]
    fn gamma_zero_regresses_to_reward() {
        let mut rng = seed::rng(3);
        let cfg = DqnConfig { hidden: vec![16], gamma: 0.0, reward_normalization: false, ..DqnConfig::default() };
        let cb = Codebook::steering(4, &ChannelParams::thz_default(2)).unwrap();
        let mut agent = DqnAgent::new(2, cb, cfg, &mut rng).unwrap();
        let h = ChannelVector(vec![Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.5)]);
        let s = BsState::new(&h, 1.0);
        for _ in 0..5 {
            agent.remember(DqnTransition { state: s.clone(), action: 2, reward: 0.7, next_state: s.clone() });
        }
        for _ in 0..500 {
            agent.train_step(&mut rng).unwrap();
        }
        assert!((agent.q_values(&s).unwrap()[2] - 0.7).abs() < 1e-2);
    }
}
