use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ddpg::{ReplayBuffer, Transition};
use crate::env::{BsState, SINR_DB_CLAMP};
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Gradients, Mlp};

/// Hyper-parameters of one BS's learner.
#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau_actor: f64,
    pub tau_critic: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Initial exploration std (variance 3).
    pub noise_sigma: f64,
    pub noise_decay: f64,
    /// Optimizer steps taken per environment interaction.
    pub updates_per_epoch: usize,
    /// Divide rewards by the largest reward magnitude seen so far before
    /// they enter the Bellman target.
    pub reward_normalization: bool,
    /// Feed the critic the action after unit-ball projection (the beam that
    /// was actually transmitted) instead of the raw actor output. Beyond
    /// unit norm only the direction of a raw action matters; a critic on
    /// raw actions extrapolates a reward for ever larger outputs and drives
    /// the tanh layer into saturation.
    pub critic_sees_beam: bool,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            actor_hidden: vec![100, 70],
            critic_hidden: vec![100, 70],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.9,
            tau_actor: 0.01,
            tau_critic: 0.01,
            buffer_capacity: 10,
            batch_size: 5,
            noise_sigma: 3f64.sqrt(),
            noise_decay: 0.99,
            updates_per_epoch: 4,
            reward_normalization: true,
            critic_sees_beam: true,
        }
    }
}

impl DdpgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        for (name, tau) in [("tau_actor", self.tau_actor), ("tau_critic", self.tau_critic)] {
            if !(0.0..=1.0).contains(&tau) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {tau}")));
            }
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 {
            return Err(Error::Config("buffer capacity and batch size must be >= 1".into()));
        }
        if !(self.noise_sigma >= 0.0) || !(self.noise_decay > 0.0 && self.noise_decay <= 1.0) {
            return Err(Error::Config("noise sigma must be >= 0 and decay in (0, 1]".into()));
        }
        if self.actor_hidden.contains(&0) || self.critic_hidden.contains(&0) {
            return Err(Error::Config("hidden layer widths must be >= 1".into()));
        }
        Ok(())
    }
}

/// Loss and objective measured on the minibatch before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

/// Map a raw action `[re; im]` to a beamformer inside the unit ball.
pub fn action_to_beamformer(action: &[f64], num_antennas: usize) -> Result<Vec<Complex64>> {
    if action.len() != 2 * num_antennas {
        return Err(Error::Dimension { expected: 2 * num_antennas, actual: action.len() });
    }
    let mut w: Vec<Complex64> = (0..num_antennas)
        .map(|i| Complex64::new(action[i], action[num_antennas + i]))
        .collect();
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 1.0 {
        w.iter_mut().for_each(|z| *z /= norm);
    }
    Ok(w)
}

/// Real form of [`action_to_beamformer`]: `a` scaled back onto the unit
/// ball when it lies outside.
pub fn project_action(action: &[f64]) -> Vec<f64> {
    let norm = action.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        action.iter().map(|x| x / norm).collect()
    } else {
        action.to_vec()
    }
}

/// Pull a gradient with respect to `project_action(a)` back to `a`. Outside
/// the ball the Jacobian is `(I - u u^T) / |a|` with `u = a / |a|`.
pub fn project_action_vjp(action: &[f64], upstream: &[f64]) -> Vec<f64> {
    let norm = action.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        let radial: f64 = action.iter().zip(upstream).map(|(a, g)| a * g).sum::<f64>() / (norm * norm);
        action.iter().zip(upstream).map(|(a, g)| (g - radial * a) / norm).collect()
    } else {
        upstream.to_vec()
    }
}

/// Network input for a state: the CSI part scaled to unit norm (left at
/// zero when nothing is known) and the SINR feature scaled to [-1, 1].
pub fn network_input(state: &BsState) -> Vec<f64> {
    let csi = state.csi();
    let norm = csi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut out = Vec::with_capacity(state.features.len());
    if norm > 0.0 {
        out.extend(csi.iter().map(|x| x / norm));
    } else {
        out.extend_from_slice(csi);
    }
    out.push(state.sinr_db() / SINR_DB_CLAMP);
    out
}

/// DDPG learner of one base station: main and target actor/critic, replay
/// memory and exploration state.
#[derive(Debug, Clone)]
pub struct Agent {
    pub id: usize,
    pub config: DdpgConfig,
    num_antennas: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub buffer: ReplayBuffer<Transition>,
    pub noise_sigma: f64,
    /// Local model as of the last federation round.
    pub last_synced: Vec<f64>,
    reward_scale: f64,
}

impl Agent {
    /// Fresh agent; targets start as copies of the main networks.
    pub fn new<R: Rng + ?Sized>(id: usize, num_antennas: usize, config: DdpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let state_dim = BsState::dim(num_antennas);
        let action_dim = 2 * num_antennas;
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&config.actor_hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend(&config.critic_hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng)?;
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, rng)?;
        Self::from_networks(id, num_antennas, config, actor, critic)
    }

    pub fn from_networks(id: usize, num_antennas: usize, config: DdpgConfig, actor: Mlp, critic: Mlp) -> Result<Self> {
        config.validate()?;
        let state_dim = BsState::dim(num_antennas);
        let action_dim = 2 * num_antennas;
        if actor.input_dim() != state_dim || actor.output_dim() != action_dim {
            return Err(Error::Architecture(format!(
                "actor {:?} does not map {state_dim} -> {action_dim}",
                actor.sizes()
            )));
        }
        if critic.input_dim() != state_dim + action_dim || critic.output_dim() != 1 {
            return Err(Error::Architecture(format!(
                "critic {:?} does not map {} -> 1",
                critic.sizes(),
                state_dim + action_dim
            )));
        }
        let mut last_synced = actor.flatten();
        last_synced.extend_from_slice(critic.params());
        Ok(Self {
            id,
            num_antennas,
            last_synced,
            actor_opt: Adam::for_net(AdamConfig::with_lr(config.actor_lr), &actor),
            critic_opt: Adam::for_net(AdamConfig::with_lr(config.critic_lr), &critic),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            noise_sigma: config.noise_sigma,
            reward_scale: 0.0,
            config,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn reward_scale(&self) -> f64 {
        if self.config.reward_normalization && self.reward_scale > 0.0 {
            self.reward_scale
        } else {
            1.0
        }
    }

    fn check_state(&self, state: &BsState) -> Result<()> {
        let dim = BsState::dim(self.num_antennas);
        if state.features.len() != dim {
            return Err(Error::Dimension { expected: dim, actual: state.features.len() });
        }
        Ok(())
    }

    /// `mu(s)`, plus i.i.d. Gaussian noise of std `noise_sigma` when exploring.
    pub fn act<R: Rng + ?Sized>(&self, state: &BsState, explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let mut a = self.actor.forward(&network_input(state))?;
        if explore && self.noise_sigma > 0.0 {
            for x in &mut a {
                let z: f64 = StandardNormal.sample(rng);
                *x += self.noise_sigma * z;
            }
        }
        Ok(a)
    }

    pub fn beamformer(&self, action: &[f64]) -> Result<Vec<Complex64>> {
        action_to_beamformer(action, self.num_antennas)
    }

    pub fn remember(&mut self, t: Transition) -> Result<()> {
        self.check_state(&t.state)?;
        self.check_state(&t.next_state)?;
        if t.action.len() != 2 * self.num_antennas {
            return Err(Error::Dimension { expected: 2 * self.num_antennas, actual: t.action.len() });
        }
        if !t.reward.is_finite() || t.action.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite transition".into()));
        }
        self.reward_scale = self.reward_scale.max(t.reward.abs());
        self.buffer.push(t);
        Ok(())
    }

    fn critic_input(&self, state_in: &[f64], action: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(state_in.len() + action.len());
        x.extend_from_slice(state_in);
        if self.config.critic_sees_beam {
            x.extend(project_action(action));
        } else {
            x.extend_from_slice(action);
        }
        x
    }

    /// Bellman targets `r / scale + gamma * Q'(s', mu'(s'))`, both bootstrap
    /// terms from the target networks.
    pub fn critic_target(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let scale = self.reward_scale();
        batch
            .iter()
            .map(|t| {
                let s_next = network_input(&t.next_state);
                let a_next = self.target_actor.forward(&s_next)?;
                let q_next = self.target_critic.forward(&self.critic_input(&s_next, &a_next))?[0];
                Ok(t.reward / scale + self.config.gamma * q_next)
            })
            .collect()
    }

    /// `Q(s, a)` from the main critic.
    pub fn q_value(&self, state: &BsState, action: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(&self.critic_input(&network_input(state), action))?[0])
    }

    /// Gradient of `mean_i Q(s_i, mu(s_i))` with respect to the actor
    /// parameters, chained through the critic's input gradient.
    pub fn actor_objective_gradient(&self, states: &[&BsState]) -> Result<(f64, Vec<f64>)> {
        let mut total = Gradients::zeros_like(&self.actor);
        let mut objective = 0.0;
        let inv = 1.0 / states.len() as f64;
        let action_start = BsState::dim(self.num_antennas);
        for s in states {
            let s_in = network_input(s);
            let trace = self.actor.forward_trace(&s_in)?;
            let a = trace.output().to_vec();
            let x = self.critic_input(&s_in, &a);
            let critic_trace = self.critic.forward_trace(&x)?;
            objective += critic_trace.output()[0] * inv;
            let dq = self.critic.backward_from(&critic_trace, &[1.0])?;
            let da = if self.config.critic_sees_beam {
                project_action_vjp(&a, &dq.input[action_start..])
            } else {
                dq.input[action_start..].to_vec()
            };
            let g = self.actor.backward_from(&trace, &da)?;
            total.accumulate(&g, inv);
        }
        Ok((objective, total.params))
    }

    /// One minibatch update of critic and actor followed by soft target
    /// updates. Returns `None` while the buffer holds fewer than B entries.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<TrainStats>> {
        let b = self.config.batch_size;
        if self.buffer.len() < b {
            return Ok(None);
        }
        let batch: Vec<Transition> = self.buffer.sample(rng, b).into_iter().cloned().collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets = self.critic_target(&refs)?;

        let inv = 1.0 / b as f64;
        let mut critic_grad = Gradients::zeros_like(&self.critic);
        let mut critic_loss = 0.0;
        for (t, y) in batch.iter().zip(&targets) {
            let x = self.critic_input(&network_input(&t.state), &t.action);
            let trace = self.critic.forward_trace(&x)?;
            let err = y - trace.output()[0];
            critic_loss += err * err * inv;
            let g = self.critic.backward_from(&trace, &[-2.0 * err * inv])?;
            critic_grad.accumulate(&g, 1.0);
        }
        self.critic_opt.step(&mut self.critic, &critic_grad.params)?;

        let states: Vec<&BsState> = batch.iter().map(|t| &t.state).collect();
        let (actor_objective, mut grad) = self.actor_objective_gradient(&states)?;
        grad.iter_mut().for_each(|g| *g = -*g);
        self.actor_opt.step(&mut self.actor, &grad)?;

        self.target_actor.soft_update(&self.actor, self.config.tau_actor)?;
        self.target_critic.soft_update(&self.critic, self.config.tau_critic)?;
        Ok(Some(TrainStats { critic_loss, actor_objective }))
    }

    pub fn decay_noise(&mut self, factor: f64) -> Result<()> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::Config(format!("noise decay factor must lie in (0, 1], got {factor}")));
        }
        self.noise_sigma *= factor;
        Ok(())
    }

    /// Main actor and critic parameters, concatenated in that order.
    pub fn local_model(&self) -> Vec<f64> {
        let mut v = self.actor.flatten();
        v.extend_from_slice(self.critic.params());
        v
    }

    pub fn local_model_len(&self) -> usize {
        self.actor.num_params() + self.critic.num_params()
    }

    /// Overwrite the main actor and critic from a concatenated vector.
    /// Targets and optimizer state are left alone.
    pub fn load_local_model(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.local_model_len() {
            return Err(Error::Architecture(format!(
                "global model has {} parameters, agent expects {}",
                params.len(),
                self.local_model_len()
            )));
        }
        let split = self.actor.num_params();
        self.actor = Mlp::unflatten(params[..split].to_vec(), &self.actor)?;
        self.critic = Mlp::unflatten(params[split..].to_vec(), &self.critic)?;
        Ok(())
    }
}
