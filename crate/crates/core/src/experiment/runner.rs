use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::baselines::{mmse_beamformers, mrt_beamformer, random_beams, zf_beamformers, Codebook, DqnAgent, DqnTransition};
use crate::ddpg::{Agent, Transition};
use crate::env::{env_step, generate_scenario, initial_states, BeamformerSet, BsState, NetworkScenario};
use crate::error::{Error, Result};
use crate::experiment::config::{ExperimentConfig, Method, StateMode};
use crate::fed::{aggregate, apply_global, federation_round_due, select_partial, select_partial_random, GlobalModel, Selection, UploadPackage};
use crate::seed;

/// Everything recorded while one run executes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub run_id: usize,
    pub method: Method,
    /// `rewards[t][k]`: reward of BS k at epoch t+1, in bps/Hz.
    pub rewards: Vec<Vec<f64>>,
    pub sum_rates: Vec<f64>,
    /// Exploration std in effect while acting at each epoch (epsilon for DQN).
    pub noise_sigma: Vec<f64>,
    pub fed_round: Vec<bool>,
    /// Sum rate of the trained policy acting greedily (no exploration noise)
    /// on the last observed states, in bps/Hz.
    pub final_throughput: f64,
    /// Bytes uploaded to the server over the whole run, all agents.
    pub bytes_uploaded: u64,
    /// Bytes that uploading every full local model each round would cost.
    pub full_model_bytes: u64,
    /// Rough multiply-add count spent on training.
    pub train_flops: f64,
    pub wall_clock: Duration,
}

impl RunResult {
    pub fn epochs(&self) -> usize {
        self.sum_rates.len()
    }
}

fn observe(state: BsState, mode: StateMode) -> BsState {
    match mode {
        StateMode::CsiSinr => state,
        StateMode::SinrOnly => state.sinr_only(),
    }
}

/// Seed of run `index` under master seed `master`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    seed::derive(master, "run", index as u64)
}

/// Draw the scenario of a run. Depends only on the run seed and the
/// scenario part of the config.
pub fn scenario_for(cfg: &ExperimentConfig, run_seed: u64) -> Result<NetworkScenario> {
    let mut rng = seed::rng(seed::derive(run_seed, "scenario", 0));
    generate_scenario(&mut rng, &cfg.scenario_config())
}

/// Execute one run of `cfg.method` on `scenario`.
pub fn run_single(cfg: &ExperimentConfig, scenario: &NetworkScenario, run_id: usize, run_seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    if scenario.num_cells != cfg.cells || scenario.num_antennas != cfg.antennas {
        return Err(Error::Config("scenario shape does not match the configuration".into()));
    }
    match cfg.method {
        Method::Fdrl | Method::DdpgLocal => run_federated_ddpg(cfg, scenario, run_id, run_seed),
        Method::Dqn => run_dqn(cfg, scenario, run_id, run_seed),
        _ => run_static(cfg, scenario, run_id, run_seed),
    }
}

/// Federated DDPG training loop. With `Method::DdpgLocal` the federation
/// step is skipped and everything else is identical.
pub fn run_federated_ddpg(cfg: &ExperimentConfig, scenario: &NetworkScenario, run_id: usize, run_seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let k = cfg.cells;
    let n = cfg.antennas;
    let federated = cfg.method == Method::Fdrl;
    let dcfg = cfg.ddpg_config();

    // All agents start from one shared initial model.
    let template = Agent::new(0, n, dcfg.clone(), &mut seed::rng(seed::derive(run_seed, "init", 0)))?;
    let mut agents: Vec<Agent> = (0..k)
        .map(|id| Agent::from_networks(id, n, dcfg.clone(), template.actor.clone(), template.critic.clone()))
        .collect::<Result<_>>()?;
    let mut rngs: Vec<_> = (0..k).map(|id| seed::rng(seed::derive(run_seed, "agent", id as u64))).collect();
    let mut fed_rng = seed::rng(seed::derive(run_seed, "fed", 0));
    let mut global = GlobalModel::initial(template.local_model(), k);
    global.importance = cfg.importance_weights();

    let model_len = template.local_model_len();
    let per_sample = 8 * template.actor.num_params() + 14 * template.critic.num_params();
    let mut train_flops = 0.0;
    let mut bytes_uploaded = 0u64;
    let mut full_model_bytes = 0u64;

    let mut states: Vec<BsState> = initial_states(scenario).into_iter().map(|s| observe(s, cfg.state_mode)).collect();
    let mut rewards = Vec::with_capacity(cfg.epochs);
    let mut sum_rates = Vec::with_capacity(cfg.epochs);
    let mut sigmas = Vec::with_capacity(cfg.epochs);
    let mut fed_flags = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let mut actions = Vec::with_capacity(k);
        let mut beams = Vec::with_capacity(k);
        for (agent, (state, rng)) in agents.iter().zip(states.iter().zip(rngs.iter_mut())) {
            let a = agent.act(state, true, rng)?;
            beams.push(agent.beamformer(&a)?);
            actions.push(a);
        }
        sigmas.push(agents[0].noise_sigma);
        let step = env_step(scenario, &BeamformerSet(beams)).map_err(|e| epoch_err(epoch, e))?;
        let next: Vec<BsState> = step.next_states.into_iter().map(|s| observe(s, cfg.state_mode)).collect();

        for (i, agent) in agents.iter_mut().enumerate() {
            agent.remember(Transition {
                state: states[i].clone(),
                action: std::mem::take(&mut actions[i]),
                reward: step.rewards[i],
                next_state: next[i].clone(),
            })?;
            for _ in 0..cfg.updates_per_epoch {
                if agent.train_step(&mut rngs[i]).map_err(|e| epoch_err(epoch, e))?.is_some() {
                    train_flops += (per_sample * cfg.batch_size) as f64;
                }
            }
            agent.decay_noise(cfg.noise_decay)?;
        }

        let due = federated && federation_round_due(epoch, cfg.fed_period)?;
        if due {
            let round = global.round + 1;
            let packages = agents
                .iter()
                .map(|a| {
                    let current = a.local_model();
                    if cfg.upload_ratio >= 1.0 {
                        Ok(UploadPackage::full(a.id as u32, round, current))
                    } else {
                        match cfg.partial_selection {
                            Selection::TopDelta => {
                                select_partial(a.id as u32, round, &current, &a.last_synced, cfg.upload_ratio)
                            }
                            Selection::Random => {
                                select_partial_random(a.id as u32, round, &current, cfg.upload_ratio, &mut fed_rng)
                            }
                        }
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            bytes_uploaded += packages.iter().map(|p| p.upload_bytes() as u64).sum::<u64>();
            full_model_bytes += (k * model_len * crate::fed::VALUE_BYTES) as u64;
            global = aggregate(&packages, &global).map_err(|e| epoch_err(epoch, e))?;
            for a in agents.iter_mut() {
                apply_global(a, &global)?;
                if cfg.sync_targets {
                    a.target_actor = a.actor.clone();
                    a.target_critic = a.critic.clone();
                }
            }
        }

        rewards.push(step.rewards);
        sum_rates.push(step.sum_rate);
        fed_flags.push(due);
        states = next;
    }

    let final_throughput = greedy_ddpg_rate(&agents, &states, scenario)?;

    Ok(RunResult {
        run_id,
        method: cfg.method,
        rewards,
        sum_rates,
        noise_sigma: sigmas,
        fed_round: fed_flags,
        final_throughput,
        bytes_uploaded,
        full_model_bytes,
        train_flops,
        wall_clock: start.elapsed(),
    })
}

/// Sum rate when every agent acts without exploration noise.
pub fn greedy_ddpg_rate(agents: &[Agent], states: &[BsState], scenario: &NetworkScenario) -> Result<f64> {
    // The rng is never drawn from when exploration is off.
    let mut rng = seed::rng(0);
    let beams = agents
        .iter()
        .zip(states)
        .map(|(a, s)| a.beamformer(&a.act(s, false, &mut rng)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(env_step(scenario, &BeamformerSet(beams))?.sum_rate)
}

fn epoch_err(epoch: usize, e: Error) -> Error {
    match e {
        Error::Epoch { .. } => e,
        other => Error::Epoch { epoch, source: Box::new(other) },
    }
}

/// Codebook DQN, one independent learner per BS.
fn run_dqn(cfg: &ExperimentConfig, scenario: &NetworkScenario, run_id: usize, run_seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let k = cfg.cells;
    let codebook = Codebook::steering(cfg.codebook_size, &cfg.channel_params())?;
    let template = DqnAgent::new(
        cfg.antennas,
        codebook,
        cfg.dqn_config(),
        &mut seed::rng(seed::derive(run_seed, "init", 0)),
    )?;
    let mut agents = vec![template; k];
    let mut rngs: Vec<_> = (0..k).map(|id| seed::rng(seed::derive(run_seed, "agent", id as u64))).collect();
    let per_sample = 6 * agents[0].qnet.num_params();
    let mut train_flops = 0.0;

    let mut states: Vec<BsState> = initial_states(scenario).into_iter().map(|s| observe(s, cfg.state_mode)).collect();
    let mut rewards = Vec::with_capacity(cfg.epochs);
    let mut sum_rates = Vec::with_capacity(cfg.epochs);
    let mut eps = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let choices = agents
            .iter()
            .zip(states.iter().zip(rngs.iter_mut()))
            .map(|(a, (s, rng))| a.select(s, true, rng))
            .collect::<Result<Vec<_>>>()?;
        let beams = BeamformerSet(choices.iter().zip(&agents).map(|(&c, a)| a.beam(c).to_vec()).collect());
        eps.push(agents[0].epsilon);
        let step = env_step(scenario, &beams).map_err(|e| epoch_err(epoch, e))?;
        let next: Vec<BsState> = step.next_states.into_iter().map(|s| observe(s, cfg.state_mode)).collect();
        for (i, agent) in agents.iter_mut().enumerate() {
            agent.remember(DqnTransition {
                state: states[i].clone(),
                action: choices[i],
                reward: step.rewards[i],
                next_state: next[i].clone(),
            });
            for _ in 0..cfg.updates_per_epoch {
                if agent.train_step(&mut rngs[i]).map_err(|e| epoch_err(epoch, e))?.is_some() {
                    train_flops += (per_sample * cfg.batch_size) as f64;
                }
            }
            agent.decay_epsilon();
        }
        rewards.push(step.rewards);
        sum_rates.push(step.sum_rate);
        states = next;
    }

    let mut rng = seed::rng(0);
    let beams = agents
        .iter()
        .zip(&states)
        .map(|(a, s)| Ok(a.beam(a.select(s, false, &mut rng)?).to_vec()))
        .collect::<Result<Vec<_>>>()?;
    let final_throughput = env_step(scenario, &BeamformerSet(beams))?.sum_rate;
    let epochs = sum_rates.len();
    Ok(RunResult {
        run_id,
        method: Method::Dqn,
        rewards,
        sum_rates,
        noise_sigma: eps,
        fed_round: vec![false; epochs],
        final_throughput,
        bytes_uploaded: 0,
        full_model_bytes: 0,
        train_flops,
        wall_clock: start.elapsed(),
    })
}

/// Beams of a non-learning method for `scenario`.
pub fn static_beams(cfg: &ExperimentConfig, scenario: &NetworkScenario, run_seed: u64) -> Result<BeamformerSet> {
    match cfg.method {
        Method::Zf => zf_beamformers(scenario),
        Method::Mmse => mmse_beamformers(scenario),
        Method::Mrt => Ok(BeamformerSet(
            (0..scenario.num_cells)
                .map(|k| mrt_beamformer(scenario.serving(k)))
                .collect::<Result<_>>()?,
        )),
        Method::Random => {
            let mut rng = seed::rng(seed::derive(run_seed, "random-beams", 0));
            Ok(random_beams(&mut rng, scenario.num_cells, scenario.num_antennas))
        }
        m => Err(Error::Config(format!("method {m} is not a fixed beamformer"))),
    }
}

/// Non-learning methods: one evaluation, repeated over the epoch axis so
/// that traces keep their usual shape.
fn run_static(cfg: &ExperimentConfig, scenario: &NetworkScenario, run_id: usize, run_seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let beams = static_beams(cfg, scenario, run_seed)?;
    let step = env_step(scenario, &beams)?;
    let e = cfg.epochs;
    Ok(RunResult {
        run_id,
        method: cfg.method,
        rewards: vec![step.rewards.clone(); e],
        sum_rates: vec![step.sum_rate; e],
        noise_sigma: vec![0.0; e],
        fed_round: vec![false; e],
        final_throughput: step.sum_rate,
        bytes_uploaded: 0,
        full_model_bytes: 0,
        train_flops: 0.0,
        wall_clock: start.elapsed(),
    })
}

/// Summary statistics of final throughput over Monte Carlo runs, scaled by
/// the configured bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, median: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, median, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: Vec<RunResult>,
    pub stats: Stats,
    /// Mean over runs of the uploaded bytes.
    pub mean_bytes_uploaded: f64,
}

impl MonteCarloResult {
    /// Per-epoch sum rate averaged over runs.
    pub fn mean_trace(&self) -> Vec<f64> {
        let e = self.runs.first().map_or(0, |r| r.epochs());
        (0..e)
            .map(|t| self.runs.iter().map(|r| r.sum_rates[t]).sum::<f64>() / self.runs.len() as f64)
            .collect()
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.final_throughput).collect()
    }
}

/// `cfg.monte_carlo_runs` independent runs, in parallel. Results are
/// ordered by run id and do not depend on the thread count.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<MonteCarloResult> {
    cfg.validate()?;
    let runs = (0..cfg.monte_carlo_runs)
        .into_par_iter()
        .map(|i| {
            let s = run_seed(cfg.seed, i);
            let scenario = scenario_for(cfg, s)?;
            run_single(cfg, &scenario, i, s)
        })
        .collect::<Result<Vec<_>>>()?;
    let tp: Vec<f64> = runs.iter().map(|r| r.final_throughput * cfg.bandwidth_hz).collect();
    let mean_bytes_uploaded = runs.iter().map(|r| r.bytes_uploaded as f64).sum::<f64>() / runs.len() as f64;
    Ok(MonteCarloResult { stats: Stats::of(&tp), runs, mean_bytes_uploaded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Antennas,
    Cells,
    Neurons,
    UploadRatio,
    Distance,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "antennas" => SweepAxis::Antennas,
            "cells" => SweepAxis::Cells,
            "neurons" => SweepAxis::Neurons,
            "upload_ratio" => SweepAxis::UploadRatio,
            "distance" => SweepAxis::Distance,
            _ => return Err(Error::Config(format!("unknown sweep axis '{s}'"))),
        })
    }

    /// Apply one axis value to a copy of `base`. Neuron values use `a/b`
    /// for two hidden widths, since `,` separates sweep values.
    pub fn apply(self, base: &ExperimentConfig, value: &str) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Antennas => cfg.set("antennas", value)?,
            SweepAxis::Cells => cfg.set("cells", value)?,
            SweepAxis::Neurons => cfg.set("neurons", &value.replace('/', ","))?,
            SweepAxis::UploadRatio => cfg.set("upload_ratio", value)?,
            SweepAxis::Distance => {
                cfg.set("distance_min", value)?;
                cfg.set("distance_max", value)?;
            }
        }
        if self == SweepAxis::Cells && !cfg.importance.is_empty() {
            cfg.importance.clear();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: String,
    pub result: MonteCarloResult,
}

/// Monte Carlo at each axis value. Every point reuses the master seed, so
/// runs with the same index see the same geometry wherever the axis allows.
pub fn sweep(base: &ExperimentConfig, axis: SweepAxis, values: &[String]) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|v| {
            let cfg = axis.apply(base, v)?;
            Ok(SweepPoint { axis_value: v.clone(), result: run_monte_carlo(&cfg)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.method = method;
        cfg.cells = 2;
        cfg.antennas = 4;
        cfg.neurons = vec![16, 16];
        cfg.epochs = 40;
        cfg.monte_carlo_runs = 2;
        cfg
    }

    #[test]
    fn stats_of_known_values() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.std - 1.2909944487358056).abs() < 1e-15);
        let one = Stats::of(&[7.0]);
        assert_eq!((one.mean, one.median, one.std), (7.0, 7.0, 0.0));
    }

    #[test]
    fn trace_shapes_and_flags() {
        let cfg = small(Method::Fdrl);
        let s = run_seed(cfg.seed, 0);
        let sc = scenario_for(&cfg, s).unwrap();
        let r = run_single(&cfg, &sc, 0, s).unwrap();
        assert_eq!(r.sum_rates.len(), 40);
        assert!(r.rewards.iter().all(|row| row.len() == 2));
        let flagged: Vec<usize> = (0..40).filter(|&t| r.fed_round[t]).map(|t| t + 1).collect();
        assert_eq!(flagged, vec![20, 40]);
        assert!(r.final_throughput.is_finite());
        let model = (9 * 16 + 16 + 16 * 16 + 16 + 16 * 8 + 8) + (17 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
        assert_eq!(r.bytes_uploaded, (2 * 2 * model * 8) as u64);
        assert_eq!(r.bytes_uploaded, r.full_model_bytes);
    }

    #[test]
    fn local_never_federates() {
        let r = run_monte_carlo(&small(Method::DdpgLocal)).unwrap();
        assert!(r.runs.iter().all(|run| run.bytes_uploaded == 0 && run.fed_round.iter().all(|f| !f)));
    }

    #[test]
    fn zero_epochs_gives_empty_traces() {
        let mut cfg = small(Method::Fdrl);
        cfg.epochs = 0;
        let r = run_monte_carlo(&cfg).unwrap();
        assert!(r.runs.iter().all(|run| run.sum_rates.is_empty() && run.final_throughput.is_finite()));
    }

    #[test]
    fn static_method_matches_direct_call() {
        let cfg = small(Method::Zf);
        let s = run_seed(cfg.seed, 0);
        let sc = scenario_for(&cfg, s).unwrap();
        let r = run_single(&cfg, &sc, 0, s).unwrap();
        let direct = crate::env::sum_rate_limited(&sc, &zf_beamformers(&sc).unwrap()).unwrap();
        assert_eq!(r.final_throughput, direct);
    }

    #[test]
    fn monte_carlo_is_deterministic() {
        let cfg = small(Method::Fdrl);
        let a = run_monte_carlo(&cfg).unwrap();
        let b = run_monte_carlo(&cfg).unwrap();
        assert_eq!(a.throughputs(), b.throughputs());
        assert_eq!(a.runs[1].rewards, b.runs[1].rewards);
    }

    #[test]
    fn dqn_runs() {
        let r = run_monte_carlo(&small(Method::Dqn)).unwrap();
        assert!(r.stats.mean.is_finite() && r.stats.mean >= 0.0);
    }
}
