use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::baselines::DqnConfig;
use crate::channel::{ChannelParams, SPEED_OF_LIGHT};
use crate::ddpg::DdpgConfig;
use crate::env::{dbm_to_watt, ScenarioConfig};
use crate::error::{Error, Result};
use crate::fed::Selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Federated DDPG.
    Fdrl,
    /// The same DDPG pipeline with federation rounds skipped.
    DdpgLocal,
    Dqn,
    Zf,
    Mmse,
    Mrt,
    Random,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Fdrl,
        Method::DdpgLocal,
        Method::Dqn,
        Method::Zf,
        Method::Mmse,
        Method::Mrt,
        Method::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Fdrl => "fdrl",
            Method::DdpgLocal => "ddpg-local",
            Method::Dqn => "dqn",
            Method::Zf => "zf",
            Method::Mmse => "mmse",
            Method::Mrt => "mrt",
            Method::Random => "random",
        }
    }

    pub fn is_learning(self) -> bool {
        matches!(self, Method::Fdrl | Method::DdpgLocal | Method::Dqn)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateMode {
    CsiSinr,
    /// CSI portion of the state zeroed; dimensions unchanged.
    SinrOnly,
}

impl StateMode {
    pub fn name(self) -> &'static str {
        match self {
            StateMode::CsiSinr => "csi+sinr",
            StateMode::SinrOnly => "sinr-only",
        }
    }
}

impl FromStr for StateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csi+sinr" => Ok(StateMode::CsiSinr),
            "sinr-only" => Ok(StateMode::SinrOnly),
            _ => Err(Error::Config(format!("unknown state_mode '{s}'"))),
        }
    }
}

/// Every knob of an experiment. Field names double as config-file keys and
/// CLI flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cells: usize,
    pub antennas: usize,
    /// Hidden widths shared by actor and critic.
    pub neurons: Vec<usize>,
    pub epochs: usize,
    pub fed_period: usize,
    pub buffer_size: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau_actor: f64,
    pub tau_critic: f64,
    pub upload_ratio: f64,
    pub partial_selection: Selection,
    pub csi_fraction: f64,
    pub state_mode: StateMode,
    pub method: Method,
    pub distance_min: f64,
    pub distance_max: f64,
    pub monte_carlo_runs: usize,
    pub seed: u64,
    pub bandwidth_hz: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub noise_sigma: f64,
    pub noise_decay: f64,
    pub updates_per_epoch: usize,
    pub reward_normalization: bool,
    /// Critic scores the projected beam rather than the raw action.
    pub critic_sees_beam: bool,
    /// Also copy the aggregated model into the target networks after each
    /// federation round (targets otherwise stay local).
    pub sync_targets: bool,
    /// Per-agent aggregation importance; empty means all ones.
    pub importance: Vec<f64>,
    pub freq_hz: f64,
    pub rho: f64,
    pub gain_db: f64,
    pub nlos_paths: usize,
    pub nlos_mag_min: f64,
    pub nlos_mag_max: f64,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub codebook_size: usize,
    pub dqn_epsilon_decay: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cells: 3,
            antennas: 8,
            neurons: vec![100, 70],
            epochs: 300,
            fed_period: 20,
            buffer_size: 10,
            batch_size: 5,
            gamma: 0.9,
            tau_actor: 0.01,
            tau_critic: 0.01,
            upload_ratio: 1.0,
            partial_selection: Selection::TopDelta,
            csi_fraction: 1.0,
            state_mode: StateMode::CsiSinr,
            method: Method::Fdrl,
            distance_min: 10.0,
            distance_max: 100.0,
            monte_carlo_runs: 100,
            seed: 1,
            bandwidth_hz: 1.0,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            noise_sigma: 3f64.sqrt(),
            noise_decay: 0.99,
            updates_per_epoch: 4,
            reward_normalization: true,
            critic_sees_beam: true,
            sync_targets: false,
            importance: Vec::new(),
            freq_hz: 0.3e12,
            rho: 0.1,
            gain_db: 10.0,
            nlos_paths: 5,
            nlos_mag_min: 0.01,
            nlos_mag_max: 0.1,
            tx_power_dbm: 10.0,
            noise_dbm: -74.0,
            codebook_size: 16,
            dqn_epsilon_decay: 0.98,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for key '{key}'")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let value = value.trim();
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v)).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "cells",
        "antennas",
        "neurons",
        "epochs",
        "fed_period",
        "buffer_size",
        "batch_size",
        "gamma",
        "tau_actor",
        "tau_critic",
        "upload_ratio",
        "partial_selection",
        "csi_fraction",
        "state_mode",
        "method",
        "distance_min",
        "distance_max",
        "monte_carlo_runs",
        "seed",
        "bandwidth_hz",
        "actor_lr",
        "critic_lr",
        "noise_sigma",
        "noise_decay",
        "updates_per_epoch",
        "reward_normalization",
        "critic_sees_beam",
        "sync_targets",
        "importance",
        "freq_hz",
        "rho",
        "gain_db",
        "nlos_paths",
        "nlos_mag_min",
        "nlos_mag_max",
        "tx_power_dbm",
        "noise_dbm",
        "codebook_size",
        "dqn_epsilon_decay",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "cells" => self.cells = parse(key, value)?,
            "antennas" => self.antennas = parse(key, value)?,
            "neurons" => self.neurons = parse_list(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "fed_period" => self.fed_period = parse(key, value)?,
            "buffer_size" => self.buffer_size = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "tau_actor" => self.tau_actor = parse(key, value)?,
            "tau_critic" => self.tau_critic = parse(key, value)?,
            "upload_ratio" => self.upload_ratio = parse(key, value)?,
            "partial_selection" => {
                self.partial_selection = match value.trim() {
                    "topk" => Selection::TopDelta,
                    "random" => Selection::Random,
                    other => return Err(Error::Config(format!("unknown partial_selection '{other}'"))),
                }
            }
            "csi_fraction" => self.csi_fraction = parse(key, value)?,
            "state_mode" => self.state_mode = value.trim().parse()?,
            "method" => self.method = value.trim().parse()?,
            "distance_min" => self.distance_min = parse(key, value)?,
            "distance_max" => self.distance_max = parse(key, value)?,
            "monte_carlo_runs" => self.monte_carlo_runs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "bandwidth_hz" => self.bandwidth_hz = parse(key, value)?,
            "actor_lr" => self.actor_lr = parse(key, value)?,
            "critic_lr" => self.critic_lr = parse(key, value)?,
            "noise_sigma" => self.noise_sigma = parse(key, value)?,
            "noise_decay" => self.noise_decay = parse(key, value)?,
            "updates_per_epoch" => self.updates_per_epoch = parse(key, value)?,
            "reward_normalization" => self.reward_normalization = parse(key, value)?,
            "critic_sees_beam" => self.critic_sees_beam = parse(key, value)?,
            "sync_targets" => self.sync_targets = parse(key, value)?,
            "importance" => self.importance = parse_list(key, value)?,
            "freq_hz" => self.freq_hz = parse(key, value)?,
            "rho" => self.rho = parse(key, value)?,
            "gain_db" => self.gain_db = parse(key, value)?,
            "nlos_paths" => self.nlos_paths = parse(key, value)?,
            "nlos_mag_min" => self.nlos_mag_min = parse(key, value)?,
            "nlos_mag_max" => self.nlos_mag_max = parse(key, value)?,
            "tx_power_dbm" => self.tx_power_dbm = parse(key, value)?,
            "noise_dbm" => self.noise_dbm = parse(key, value)?,
            "codebook_size" => self.codebook_size = parse(key, value)?,
            "dqn_epsilon_decay" => self.dqn_epsilon_decay = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        Ok(match key {
            "cells" => self.cells.to_string(),
            "antennas" => self.antennas.to_string(),
            "neurons" => join(&self.neurons),
            "epochs" => self.epochs.to_string(),
            "fed_period" => self.fed_period.to_string(),
            "buffer_size" => self.buffer_size.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "gamma" => self.gamma.to_string(),
            "tau_actor" => self.tau_actor.to_string(),
            "tau_critic" => self.tau_critic.to_string(),
            "upload_ratio" => self.upload_ratio.to_string(),
            "partial_selection" => match self.partial_selection {
                Selection::TopDelta => "topk".into(),
                Selection::Random => "random".into(),
            },
            "csi_fraction" => self.csi_fraction.to_string(),
            "state_mode" => self.state_mode.name().into(),
            "method" => self.method.name().into(),
            "distance_min" => self.distance_min.to_string(),
            "distance_max" => self.distance_max.to_string(),
            "monte_carlo_runs" => self.monte_carlo_runs.to_string(),
            "seed" => self.seed.to_string(),
            "bandwidth_hz" => self.bandwidth_hz.to_string(),
            "actor_lr" => self.actor_lr.to_string(),
            "critic_lr" => self.critic_lr.to_string(),
            "noise_sigma" => self.noise_sigma.to_string(),
            "noise_decay" => self.noise_decay.to_string(),
            "updates_per_epoch" => self.updates_per_epoch.to_string(),
            "reward_normalization" => self.reward_normalization.to_string(),
            "critic_sees_beam" => self.critic_sees_beam.to_string(),
            "sync_targets" => self.sync_targets.to_string(),
            "importance" => join(&self.importance),
            "freq_hz" => self.freq_hz.to_string(),
            "rho" => self.rho.to_string(),
            "gain_db" => self.gain_db.to_string(),
            "nlos_paths" => self.nlos_paths.to_string(),
            "nlos_mag_min" => self.nlos_mag_min.to_string(),
            "nlos_mag_max" => self.nlos_mag_max.to_string(),
            "tx_power_dbm" => self.tx_power_dbm.to_string(),
            "noise_dbm" => self.noise_dbm.to_string(),
            "codebook_size" => self.codebook_size.to_string(),
            "dqn_epsilon_decay" => self.dqn_epsilon_decay.to_string(),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        })
    }

    /// Apply `key = value` lines on top of `self`. Blank lines and text after
    /// `#` are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    /// Render as a config file that [`ExperimentConfig::from_text`] reads back.
    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("every listed key is readable")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("cells", self.cells),
            ("antennas", self.antennas),
            ("fed_period", self.fed_period),
            ("buffer_size", self.buffer_size),
            ("batch_size", self.batch_size),
            ("monte_carlo_runs", self.monte_carlo_runs),
            ("updates_per_epoch", self.updates_per_epoch),
            ("codebook_size", self.codebook_size),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.neurons.is_empty() || self.neurons.contains(&0) {
            return Err(Error::Config("neurons must list positive hidden widths".into()));
        }
        if !(self.upload_ratio > 0.0 && self.upload_ratio <= 1.0) {
            return Err(Error::Config(format!("upload_ratio must lie in (0, 1], got {}", self.upload_ratio)));
        }
        if !(0.0..=1.0).contains(&self.csi_fraction) {
            return Err(Error::Config(format!("csi_fraction must lie in [0, 1], got {}", self.csi_fraction)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.distance_min > 0.0 && self.distance_min <= self.distance_max) {
            return Err(Error::Config("distance range must satisfy 0 < min <= max".into()));
        }
        if !self.importance.is_empty() && self.importance.len() != self.cells {
            return Err(Error::Config("importance must list one weight per cell".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth_hz must be > 0".into()));
        }
        self.ddpg_config().validate()?;
        self.channel_params().validate()
    }

    pub fn channel_params(&self) -> ChannelParams {
        ChannelParams {
            freq_hz: self.freq_hz,
            rho: self.rho,
            gain_db: self.gain_db,
            num_nlos: self.nlos_paths,
            antenna_spacing: SPEED_OF_LIGHT / self.freq_hz / 2.0,
            num_antennas: self.antennas,
            nlos_mag_range: (self.nlos_mag_min, self.nlos_mag_max),
        }
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            num_cells: self.cells,
            channel: self.channel_params(),
            distance_range: (self.distance_min, self.distance_max),
            tx_power_w: dbm_to_watt(self.tx_power_dbm),
            noise_w: dbm_to_watt(self.noise_dbm),
            csi_fraction: self.csi_fraction,
        }
    }

    pub fn ddpg_config(&self) -> DdpgConfig {
        DdpgConfig {
            actor_hidden: self.neurons.clone(),
            critic_hidden: self.neurons.clone(),
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            gamma: self.gamma,
            tau_actor: self.tau_actor,
            tau_critic: self.tau_critic,
            buffer_capacity: self.buffer_size,
            batch_size: self.batch_size,
            noise_sigma: self.noise_sigma,
            noise_decay: self.noise_decay,
            updates_per_epoch: self.updates_per_epoch,
            reward_normalization: self.reward_normalization,
            critic_sees_beam: self.critic_sees_beam,
        }
    }

    pub fn dqn_config(&self) -> DqnConfig {
        DqnConfig {
            hidden: self.neurons.clone(),
            lr: self.critic_lr,
            gamma: self.gamma,
            tau: self.tau_critic,
            buffer_capacity: self.buffer_size,
            batch_size: self.batch_size,
            epsilon: 1.0,
            epsilon_decay: self.dqn_epsilon_decay,
            epsilon_min: 0.01,
            updates_per_epoch: self.updates_per_epoch,
            reward_normalization: self.reward_normalization,
        }
    }

    pub fn importance_weights(&self) -> Vec<f64> {
        if self.importance.is_empty() {
            vec![1.0; self.cells]
        } else {
            self.importance.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = ExperimentConfig::default();
        assert_eq!((c.epochs, c.fed_period, c.buffer_size, c.batch_size), (300, 20, 10, 5));
        assert_eq!((c.gamma, c.tau_actor, c.tau_critic), (0.9, 0.01, 0.01));
        assert_eq!((c.freq_hz, c.rho, c.gain_db, c.nlos_paths), (0.3e12, 0.1, 10.0, 5));
        assert_eq!((c.tx_power_dbm, c.noise_dbm), (10.0, -74.0));
        assert!((c.noise_sigma * c.noise_sigma - 3.0).abs() < 1e-15);
        c.validate().unwrap();
    }

    #[test]
    fn parses_key_value_text() {
        let cfg = ExperimentConfig::from_text(
            "# comment\ncells = 2\nantennas=16  # trailing\n\nneurons = 30,30\nmethod = ddpg-local\nstate_mode = sinr-only\n",
        )
        .unwrap();
        assert_eq!(cfg.cells, 2);
        assert_eq!(cfg.antennas, 16);
        assert_eq!(cfg.neurons, vec![30, 30]);
        assert_eq!(cfg.method, Method::DdpgLocal);
        assert_eq!(cfg.state_mode, StateMode::SinrOnly);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("upload_ratio", "0.1").unwrap();
        cfg.set("partial_selection", "random").unwrap();
        cfg.set("importance", "1,1,0.5").unwrap();
        assert_eq!(ExperimentConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_text("cells = 0").is_err());
        assert!(ExperimentConfig::from_text("bogus = 1").is_err());
        assert!(ExperimentConfig::from_text("cells 3").is_err());
        assert!(ExperimentConfig::from_text("upload_ratio = 0").is_err());
        assert!(ExperimentConfig::from_text("gamma = 1").is_err());
        assert!(ExperimentConfig::from_text("method = magic").is_err());
        let err = ExperimentConfig::from_text("cells = x").unwrap_err();
        assert_eq!(err.category(), "config");
    }
}
