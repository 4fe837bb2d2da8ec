//! Multi-cell downlink environment: SINR and rate evaluation, the
//! limited-CSI sum rate, and the synchronous RL step shared by all agents.
//!
//! Channel indexing: `channels[j][k]` is `h_jk`, the link from BS `j` to
//! UE `k`. UE `k` is served by BS `k` and hears every other BS as
//! interference.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    channel_response, draw_nlos, limited_csi, ChannelParams, ChannelVector, LinkGeometry,
};
use crate::error::{Error, Result};

/// Tolerance on `|w|^2 <= 1`.
pub const POWER_TOL: f64 = 1e-9;
/// Bounds of the SINR feature in dB.
pub const SINR_DB_CLAMP: f64 = 60.0;

pub fn dbm_to_watt(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Everything needed to draw a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub num_cells: usize,
    pub channel: ChannelParams,
    /// Inclusive BS-UE distance range (m).
    pub distance_range: (f64, f64),
    pub tx_power_w: f64,
    pub noise_w: f64,
    pub csi_fraction: f64,
}

/// Ground truth of one Monte Carlo run. Immutable once generated.
#[derive(Debug, Clone)]
pub struct NetworkScenario {
    pub num_cells: usize,
    pub num_antennas: usize,
    pub tx_power_w: f64,
    pub noise_w: f64,
    pub csi_fraction: f64,
    /// `channels[j][k]` = BS j -> UE k.
    pub channels: Vec<Vec<ChannelVector>>,
    pub geometry: Vec<Vec<LinkGeometry>>,
    limited: Vec<ChannelVector>,
}

impl NetworkScenario {
    pub fn new(
        channels: Vec<Vec<ChannelVector>>,
        geometry: Vec<Vec<LinkGeometry>>,
        tx_power_w: f64,
        noise_w: f64,
        csi_fraction: f64,
    ) -> Result<Self> {
        let k = channels.len();
        if k == 0 {
            return Err(Error::Config("scenario needs at least one cell".into()));
        }
        let n = channels[0].first().map(|h| h.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::Config("scenario needs at least one antenna".into()));
        }
        for row in &channels {
            if row.len() != k {
                return Err(Error::Dimension { expected: k, actual: row.len() });
            }
            for h in row {
                if h.len() != n {
                    return Err(Error::Dimension { expected: n, actual: h.len() });
                }
                if h.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::Domain("non-finite channel entry".into()));
                }
            }
        }
        if geometry.len() != k || geometry.iter().any(|r| r.len() != k) {
            return Err(Error::Config("geometry must be K x K".into()));
        }
        if !(tx_power_w > 0.0) || !(noise_w > 0.0) {
            return Err(Error::Config("transmit power and noise power must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&csi_fraction) {
            return Err(Error::Config(format!("csi_fraction must lie in [0, 1], got {csi_fraction}")));
        }
        let limited = (0..k).map(|i| limited_csi(&channels[i][i], csi_fraction)).collect();
        Ok(Self {
            num_cells: k,
            num_antennas: n,
            tx_power_w,
            noise_w,
            csi_fraction,
            channels,
            geometry,
            limited,
        })
    }

    pub fn channel(&self, from_bs: usize, to_ue: usize) -> &ChannelVector {
        &self.channels[from_bs][to_ue]
    }

    /// The serving channel `h_kk`.
    pub fn serving(&self, k: usize) -> &ChannelVector {
        &self.channels[k][k]
    }

    /// The serving channel as known at BS `k`.
    pub fn serving_limited(&self, k: usize) -> &ChannelVector {
        &self.limited[k]
    }

    /// Same geometry and channels, different CSI fraction.
    pub fn with_csi_fraction(&self, eta: f64) -> Result<Self> {
        Self::new(
            self.channels.clone(),
            self.geometry.clone(),
            self.tx_power_w,
            self.noise_w,
            eta,
        )
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.num_cells {
            return Err(Error::Index { index: k, len: self.num_cells });
        }
        Ok(())
    }
}

/// Draw a scenario. Per link (row-major over BS, then UE) the draws are
/// distance, angle of departure, then the NLoS factors; the number of
/// antennas never changes how many values are consumed, so scenarios that
/// differ only in `N` share their geometry under the same seed.
pub fn generate_scenario<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Result<NetworkScenario> {
    cfg.channel.validate()?;
    let (lo, hi) = cfg.distance_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::Config(format!("invalid distance range [{lo}, {hi}]")));
    }
    let k = cfg.num_cells;
    if k == 0 {
        return Err(Error::Config("num_cells must be >= 1".into()));
    }
    let mut channels = Vec::with_capacity(k);
    let mut geometry = Vec::with_capacity(k);
    for _bs in 0..k {
        let mut hrow = Vec::with_capacity(k);
        let mut grow = Vec::with_capacity(k);
        for _ue in 0..k {
            let distance = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let aod = rng.random_range(-PI / 2.0..=PI / 2.0);
            let geom = LinkGeometry { distance, aod };
            let nlos = draw_nlos(rng, cfg.channel.num_nlos, cfg.channel.nlos_mag_range)?;
            hrow.push(channel_response(&cfg.channel, &geom, &nlos)?);
            grow.push(geom);
        }
        channels.push(hrow);
        geometry.push(grow);
    }
    NetworkScenario::new(channels, geometry, cfg.tx_power_w, cfg.noise_w, cfg.csi_fraction)
}

/// One beamforming vector per BS.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet(pub Vec<Vec<Complex64>>);

impl BeamformerSet {
    pub fn zeros(k: usize, n: usize) -> Self {
        Self(vec![vec![Complex64::new(0.0, 0.0); n]; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn beam(&self, k: usize) -> &[Complex64] {
        &self.0[k]
    }

    /// Checks shape and `|w_k|^2 <= 1 + POWER_TOL` for every beam.
    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        if self.0.len() != k {
            return Err(Error::Dimension { expected: k, actual: self.0.len() });
        }
        for (i, w) in self.0.iter().enumerate() {
            if w.len() != n {
                return Err(Error::Dimension { expected: n, actual: w.len() });
            }
            let norm_sq: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            if !(norm_sq <= 1.0 + POWER_TOL) {
                return Err(Error::Constraint { k: i, norm_sq });
            }
        }
        Ok(())
    }
}

/// Received powers at UE `k` given the numerator channel `desired`.
fn sinr_with(scenario: &NetworkScenario, beams: &BeamformerSet, k: usize, desired: &ChannelVector) -> f64 {
    let p = scenario.tx_power_w;
    let signal = p * desired.hdot(beams.beam(k)).norm_sqr();
    let interference: f64 = (0..scenario.num_cells)
        .filter(|&j| j != k)
        .map(|j| p * scenario.channel(j, k).hdot(beams.beam(j)).norm_sqr())
        .sum();
    signal / (interference + scenario.noise_w)
}

/// SINR at UE `k` with true channels everywhere.
pub fn sinr(scenario: &NetworkScenario, beams: &BeamformerSet, k: usize) -> Result<f64> {
    scenario.check_index(k)?;
    beams.validate(scenario.num_cells, scenario.num_antennas)?;
    Ok(sinr_with(scenario, beams, k, scenario.serving(k)))
}

/// SINR at UE `k` with the BS-side limited serving channel in the numerator.
/// Interference and noise always use the true channels.
pub fn sinr_limited(scenario: &NetworkScenario, beams: &BeamformerSet, k: usize) -> Result<f64> {
    scenario.check_index(k)?;
    beams.validate(scenario.num_cells, scenario.num_antennas)?;
    Ok(sinr_with(scenario, beams, k, scenario.serving_limited(k)))
}

/// Spectral efficiency `log2(1 + gamma)` in bits/s/Hz.
pub fn rate(gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("SINR must be >= 0, got {gamma}")));
    }
    Ok((1.0 + gamma).log2())
}

pub fn sum_rate_limited(scenario: &NetworkScenario, beams: &BeamformerSet) -> Result<f64> {
    beams.validate(scenario.num_cells, scenario.num_antennas)?;
    (0..scenario.num_cells)
        .map(|k| rate(sinr_with(scenario, beams, k, scenario.serving_limited(k))))
        .sum()
}

/// Full-CSI sum rate, the quantity a genie would report.
pub fn sum_rate(scenario: &NetworkScenario, beams: &BeamformerSet) -> Result<f64> {
    beams.validate(scenario.num_cells, scenario.num_antennas)?;
    (0..scenario.num_cells)
        .map(|k| rate(sinr_with(scenario, beams, k, scenario.serving(k))))
        .sum()
}

/// Observation of one BS: `[Re(h_lim); Im(h_lim); SINR in dB]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsState {
    pub features: Vec<f64>,
}

impl BsState {
    pub fn dim(num_antennas: usize) -> usize {
        2 * num_antennas + 1
    }

    pub fn new(h_lim: &ChannelVector, sinr: f64) -> Self {
        let n = h_lim.len();
        let mut features = Vec::with_capacity(2 * n + 1);
        features.extend(h_lim.0.iter().map(|z| z.re));
        features.extend(h_lim.0.iter().map(|z| z.im));
        features.push(sinr_db_clamped(sinr));
        Self { features }
    }

    pub fn num_antennas(&self) -> usize {
        (self.features.len() - 1) / 2
    }

    pub fn csi(&self) -> &[f64] {
        &self.features[..self.features.len() - 1]
    }

    pub fn sinr_db(&self) -> f64 {
        self.features[self.features.len() - 1]
    }

    /// The same state with the CSI portion zeroed (SINR-only feedback).
    pub fn sinr_only(mut self) -> Self {
        let n = self.features.len() - 1;
        self.features[..n].iter_mut().for_each(|x| *x = 0.0);
        self
    }
}

pub fn sinr_db_clamped(gamma: f64) -> f64 {
    let db = 10.0 * gamma.log10();
    if db.is_nan() {
        -SINR_DB_CLAMP
    } else {
        db.clamp(-SINR_DB_CLAMP, SINR_DB_CLAMP)
    }
}

/// States every BS observes before its first action: zero beams, so the
/// fed-back SINR is zero.
pub fn initial_states(scenario: &NetworkScenario) -> Vec<BsState> {
    (0..scenario.num_cells)
        .map(|k| BsState::new(scenario.serving_limited(k), 0.0))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// Per-BS reward, the limited-CSI rate.
    pub rewards: Vec<f64>,
    pub next_states: Vec<BsState>,
    pub sinrs: Vec<f64>,
    pub sum_rate: f64,
}

/// Joint step: all K actions are evaluated together against the fixed
/// channels of the scenario.
pub fn env_step(scenario: &NetworkScenario, actions: &BeamformerSet) -> Result<StepResult> {
    actions.validate(scenario.num_cells, scenario.num_antennas)?;
    let k = scenario.num_cells;
    let mut rewards = Vec::with_capacity(k);
    let mut next_states = Vec::with_capacity(k);
    let mut sinrs = Vec::with_capacity(k);
    for i in 0..k {
        let gamma = sinr_with(scenario, actions, i, scenario.serving(i));
        let gamma_lim = sinr_with(scenario, actions, i, scenario.serving_limited(i));
        rewards.push(rate(gamma_lim)?);
        next_states.push(BsState::new(scenario.serving_limited(i), gamma));
        sinrs.push(gamma);
    }
    let sum_rate = rewards.iter().sum();
    Ok(StepResult { rewards, next_states, sinrs, sum_rate })
}
