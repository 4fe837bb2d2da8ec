//! Edge-server federation: full and partial uploads, coordinate-wise
//! averaging, and redistribution of the global model.
//!
//! # Upload wire format
//!
//! All fields little-endian:
//!
//! ```text
//! magic      8 bytes  "THZPKG01"
//! agent_id   u32
//! round      u32
//! kind       u8       0 = full, 1 = partial
//! ratio      f64      uploaded fraction of the model
//! total      u64      parameter count of the full model
//! count      u64      number of payload entries
//! payload    full:    count x f64           (count == total)
//!            partial: count x (u32 index, f64 value), indices strictly increasing
//! ```

use rand::Rng;

use crate::ddpg::Agent;
use crate::error::{Error, Result};
use crate::nn::codec::Reader;

pub const PACKAGE_MAGIC: &[u8; 8] = b"THZPKG01";
/// Bytes charged per uploaded parameter value.
pub const VALUE_BYTES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Full(Vec<f64>),
    /// Sorted `(index, value)` pairs.
    Partial(Vec<(u32, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UploadPackage {
    pub agent_id: u32,
    pub round: u32,
    pub ratio: f64,
    pub total: usize,
    pub payload: Payload,
}

/// How a partial upload picks its coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// Largest `|current - last_synced|`, ties to the lower index.
    TopDelta,
    /// Uniformly random subset.
    Random,
}

/// Number of coordinates uploaded at `ratio`: `ceil(ratio * n)`, with a
/// relative slack of 1e-12 so that products like `0.1 * 30` do not round up
/// past the intended count.
pub fn upload_count(n: usize, ratio: f64) -> usize {
    let exact = ratio * n as f64;
    ((exact - exact.abs() * 1e-12).ceil() as usize).clamp(1, n.max(1))
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::Config(format!("upload ratio must lie in (0, 1], got {ratio}")));
    }
    Ok(())
}

impl UploadPackage {
    pub fn full(agent_id: u32, round: u32, params: Vec<f64>) -> Self {
        Self { agent_id, round, ratio: 1.0, total: params.len(), payload: Payload::Full(params) }
    }

    /// Number of parameter values carried.
    pub fn value_count(&self) -> usize {
        match &self.payload {
            Payload::Full(v) => v.len(),
            Payload::Partial(e) => e.len(),
        }
    }

    /// Upload cost in parameter-value bytes (indices and header excluded).
    pub fn upload_bytes(&self) -> usize {
        self.value_count() * VALUE_BYTES
    }

    /// Expand to a dense vector, taking uncovered coordinates from `fill`.
    pub fn densify(&self, fill: &[f64]) -> Result<Vec<f64>> {
        if fill.len() != self.total {
            return Err(Error::Protocol(format!(
                "package of {} parameters against a {}-parameter model",
                self.total,
                fill.len()
            )));
        }
        match &self.payload {
            Payload::Full(v) => Ok(v.clone()),
            Payload::Partial(entries) => {
                let mut out = fill.to_vec();
                for &(i, v) in entries {
                    out[i as usize] = v;
                }
                Ok(out)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.payload {
            Payload::Full(v) => {
                if v.len() != self.total {
                    return Err(Error::Protocol(format!(
                        "full package carries {} values, header says {}",
                        v.len(),
                        self.total
                    )));
                }
            }
            Payload::Partial(entries) => {
                let mut prev: Option<u32> = None;
                for &(i, _) in entries {
                    if i as usize >= self.total || prev.is_some_and(|p| p >= i) {
                        return Err(Error::Protocol(format!(
                            "partial indices must be strictly increasing and below {}",
                            self.total
                        )));
                    }
                    prev = Some(i);
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = PACKAGE_MAGIC.to_vec();
        out.extend_from_slice(&self.agent_id.to_le_bytes());
        out.extend_from_slice(&self.round.to_le_bytes());
        out.push(matches!(self.payload, Payload::Partial(_)) as u8);
        out.extend_from_slice(&self.ratio.to_le_bytes());
        out.extend_from_slice(&(self.total as u64).to_le_bytes());
        out.extend_from_slice(&(self.value_count() as u64).to_le_bytes());
        match &self.payload {
            Payload::Full(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::Partial(e) => e.iter().for_each(|(i, x)| {
                out.extend_from_slice(&i.to_le_bytes());
                out.extend_from_slice(&x.to_le_bytes());
            }),
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        r.expect_magic(PACKAGE_MAGIC)?;
        let agent_id = r.u32()?;
        let round = r.u32()?;
        let kind = r.u8()?;
        let ratio = r.f64()?;
        let total = r.u64()? as usize;
        let count = r.u64()? as usize;
        let payload = match kind {
            0 => Payload::Full((0..count).map(|_| r.f64()).collect::<Result<_>>()?),
            1 => Payload::Partial(
                (0..count)
                    .map(|_| Ok((r.u32()?, r.f64()?)))
                    .collect::<Result<_>>()?,
            ),
            other => return Err(Error::Format(format!("unknown package kind {other}"))),
        };
        if r.position() != buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", buf.len() - r.position())));
        }
        let pkg = Self { agent_id, round, ratio, total, payload };
        pkg.validate()?;
        Ok(pkg)
    }
}

/// Top-|delta| partial upload of `current` relative to `last_synced`.
pub fn select_partial(
    agent_id: u32,
    round: u32,
    current: &[f64],
    last_synced: &[f64],
    ratio: f64,
) -> Result<UploadPackage> {
    check_ratio(ratio)?;
    if current.len() != last_synced.len() {
        return Err(Error::Dimension { expected: last_synced.len(), actual: current.len() });
    }
    let n = current.len();
    let count = upload_count(n, ratio);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps lower indices first among equal deltas.
    order.sort_by(|&a, &b| {
        let da = (current[a] - last_synced[a]).abs();
        let db = (current[b] - last_synced[b]).abs();
        db.total_cmp(&da)
    });
    let mut picked: Vec<usize> = order.into_iter().take(count).collect();
    picked.sort_unstable();
    Ok(UploadPackage {
        agent_id,
        round,
        ratio,
        total: n,
        payload: Payload::Partial(picked.into_iter().map(|i| (i as u32, current[i])).collect()),
    })
}

/// Partial upload of a uniformly random coordinate subset.
pub fn select_partial_random<R: Rng + ?Sized>(
    agent_id: u32,
    round: u32,
    current: &[f64],
    ratio: f64,
    rng: &mut R,
) -> Result<UploadPackage> {
    check_ratio(ratio)?;
    let n = current.len();
    let count = upload_count(n, ratio);
    let mut picked = rand::seq::index::sample(rng, n, count).into_vec();
    picked.sort_unstable();
    Ok(UploadPackage {
        agent_id,
        round,
        ratio,
        total: n,
        payload: Payload::Partial(picked.into_iter().map(|i| (i as u32, current[i])).collect()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalModel {
    pub params: Vec<f64>,
    pub round: u32,
    /// Importance weight per agent id; the aggregate is
    /// `(1/K) sum_k xi_k theta_k`.
    pub importance: Vec<f64>,
}

impl GlobalModel {
    /// Round-zero model with unit importance for `num_agents` agents.
    pub fn initial(params: Vec<f64>, num_agents: usize) -> Self {
        Self { params, round: 0, importance: vec![1.0; num_agents] }
    }
}

/// Coordinate-wise mean of the uploaded models. A coordinate that an agent
/// did not upload counts as `previous.params[i]` for that agent. Packages
/// are ordered by agent id before summation, so the result does not depend
/// on arrival order.
pub fn aggregate(packages: &[UploadPackage], previous: &GlobalModel) -> Result<GlobalModel> {
    if packages.is_empty() {
        return Err(Error::Protocol("aggregation needs at least one package".into()));
    }
    let n = previous.params.len();
    let mut sorted: Vec<&UploadPackage> = packages.iter().collect();
    sorted.sort_by_key(|p| p.agent_id);
    if sorted.windows(2).any(|w| w[0].agent_id == w[1].agent_id) {
        return Err(Error::Protocol("duplicate agent id in round".into()));
    }
    let mut mean = vec![0.0; n];
    for (count, pkg) in sorted.iter().enumerate() {
        pkg.validate()?;
        let xi = previous.importance.get(pkg.agent_id as usize).copied().ok_or_else(|| {
            Error::Protocol(format!("no importance weight for agent {}", pkg.agent_id))
        })?;
        let dense = pkg.densify(&previous.params)?;
        // Running mean: identical inputs reproduce themselves bit for bit.
        let denom = (count + 1) as f64;
        for (m, v) in mean.iter_mut().zip(dense) {
            let x = if xi == 1.0 { v } else { xi * v };
            if count == 0 {
                *m = x;
            } else {
                *m += (x - *m) / denom;
            }
        }
    }
    Ok(GlobalModel {
        params: mean,
        round: previous.round + 1,
        importance: previous.importance.clone(),
    })
}

/// Overwrite the agent's main actor and critic with the global model and
/// record it as the last synchronised snapshot.
pub fn apply_global(agent: &mut Agent, global: &GlobalModel) -> Result<()> {
    agent.load_local_model(&global.params)?;
    agent.last_synced = global.params.clone();
    Ok(())
}

pub fn federation_round_due(epoch: usize, period: usize) -> Result<bool> {
    if period == 0 {
        return Err(Error::Config("federation period T must be >= 1".into()));
    }
    Ok(epoch % period == 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::DdpgConfig;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn global(params: Vec<f64>, k: usize) -> GlobalModel {
        GlobalModel::initial(params, k)
    }

    #[test]
    fn plain_mean() {
        let g = aggregate(
            &[UploadPackage::full(0, 1, vec![1.0, 2.0]), UploadPackage::full(1, 1, vec![3.0, 4.0])],
            &global(vec![0.0, 0.0], 2),
        )
        .unwrap();
        assert_eq!(g.params, vec![2.0, 3.0]);
        assert_eq!(g.round, 1);
        let one = aggregate(&[UploadPackage::full(0, 1, vec![0.1, -7.5])], &global(vec![0.0, 0.0], 1)).unwrap();
        assert_eq!(one.params, vec![0.1, -7.5]);
    }

    #[test]
    fn missing_coordinates_use_previous_global() {
        let prev = global(vec![4.0, 10.0], 2);
        let a = UploadPackage { agent_id: 0, round: 1, ratio: 0.5, total: 2, payload: Payload::Partial(vec![(0, 2.0)]) };
        let b = UploadPackage { agent_id: 1, round: 1, ratio: 0.5, total: 2, payload: Payload::Partial(vec![(1, 20.0)]) };
        let g = aggregate(&[a, b], &prev).unwrap();
        assert_eq!(g.params, vec![(2.0 + 4.0) / 2.0, (10.0 + 20.0) / 2.0]);
    }

    #[test]
    fn protocol_errors() {
        let prev = global(vec![0.0; 3], 2);
        assert!(matches!(aggregate(&[], &prev), Err(Error::Protocol(_))));
        assert!(matches!(
            aggregate(&[UploadPackage::full(0, 1, vec![1.0; 2])], &prev),
            Err(Error::Protocol(_))
        ));
        assert!(matches!(
            aggregate(&[UploadPackage::full(0, 1, vec![1.0; 3]), UploadPackage::full(0, 1, vec![1.0; 3])], &prev),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn top_delta_selection() {
        let last = vec![0.0; 4];
        let cur = vec![0.0, 5.0, -7.0, 1.0];
        let p = select_partial(0, 1, &cur, &last, 0.5).unwrap();
        assert_eq!(p.payload, Payload::Partial(vec![(1, 5.0), (2, -7.0)]));
        let same = select_partial(0, 1, &last, &last, 0.5).unwrap();
        assert_eq!(same.payload, Payload::Partial(vec![(0, 0.0), (1, 0.0)]));
        assert!(matches!(select_partial(0, 1, &cur, &last, 0.0), Err(Error::Config(_))));
        let all = select_partial(0, 1, &cur, &last, 1.0).unwrap();
        assert_eq!(all.densify(&[9.0; 4]).unwrap(), cur);
    }

    #[test]
    fn upload_counts() {
        assert_eq!(upload_count(30, 0.1), 3);
        assert_eq!(upload_count(31, 0.1), 4);
        assert_eq!(upload_count(10, 1.0), 10);
        assert_eq!(upload_count(3, 0.01), 1);
    }

    #[test]
    fn random_selection() {
        let cur: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let a = select_partial_random(2, 1, &cur, 0.2, &mut seed::rng(1)).unwrap();
        let b = select_partial_random(2, 1, &cur, 0.2, &mut seed::rng(1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.value_count(), 10);
        a.validate().unwrap();
    }

    #[test]
    fn round_schedule() {
        assert!(federation_round_due(20, 20).unwrap());
        assert!(!federation_round_due(21, 20).unwrap());
        assert!(federation_round_due(0, 20).unwrap());
        assert!(federation_round_due(5, 0).is_err());
    }

    #[test]
    fn wire_format_is_byte_exact() {
        let p = UploadPackage { agent_id: 7, round: 2, ratio: 0.5, total: 4, payload: Payload::Partial(vec![(1, 1.5), (3, -2.0)]) };
        let bytes = p.to_bytes();
        let mut expected = b"THZPKG01".to_vec();
        expected.extend_from_slice(&7u32.to_le_bytes());
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.push(1);
        expected.extend_from_slice(&0.5f64.to_le_bytes());
        expected.extend_from_slice(&4u64.to_le_bytes());
        expected.extend_from_slice(&2u64.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&1.5f64.to_le_bytes());
        expected.extend_from_slice(&3u32.to_le_bytes());
        expected.extend_from_slice(&(-2.0f64).to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(UploadPackage::from_bytes(&bytes).unwrap(), p);

        let full = UploadPackage::full(1, 3, vec![0.25, 8.0]);
        let fb = full.to_bytes();
        assert_eq!(fb.len(), 8 + 4 + 4 + 1 + 8 + 8 + 8 + 16);
        assert_eq!(fb[16], 0);
        assert_eq!(UploadPackage::from_bytes(&fb).unwrap(), full);
    }

    #[test]
    fn malformed_packages_rejected() {
        let bad = UploadPackage { agent_id: 0, round: 1, ratio: 0.5, total: 4, payload: Payload::Partial(vec![(2, 1.0), (1, 1.0)]) };
        assert!(UploadPackage::from_bytes(&bad.to_bytes()).is_err());
        let oob = UploadPackage { agent_id: 0, round: 1, ratio: 0.5, total: 2, payload: Payload::Partial(vec![(5, 1.0)]) };
        assert!(oob.validate().is_err());
        let mut bytes = UploadPackage::full(0, 1, vec![1.0]).to_bytes();
        bytes[16] = 9;
        assert!(matches!(UploadPackage::from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn apply_global_synchronises_main_networks() {
        let cfg = DdpgConfig { actor_hidden: vec![5], critic_hidden: vec![4], ..DdpgConfig::default() };
        let mut rng = seed::rng(3);
        let mut a = Agent::new(0, 2, cfg.clone(), &mut rng).unwrap();
        let mut b = Agent::new(1, 2, cfg, &mut rng).unwrap();
        let targets = (a.target_actor.clone(), a.target_critic.clone());
        let g = aggregate(
            &[UploadPackage::full(0, 1, a.local_model()), UploadPackage::full(1, 1, b.local_model())],
            &GlobalModel::initial(a.local_model(), 2),
        )
        .unwrap();
        apply_global(&mut a, &g).unwrap();
        apply_global(&mut b, &g).unwrap();
        assert_eq!(a.local_model(), g.params);
        assert_eq!(a.actor, b.actor);
        assert_eq!(a.critic, b.critic);
        assert_eq!(a.last_synced, g.params);
        assert_eq!((a.target_actor.clone(), a.target_critic.clone()), targets);
        assert!(apply_global(&mut a, &GlobalModel::initial(vec![0.0; 3], 2)).is_err());
    }

    proptest! {
        #[test]
        fn identical_models_are_a_fixed_point(vals in proptest::collection::vec(-1e3f64..1e3, 1..40), k in 1usize..7) {
            let pkgs: Vec<_> = (0..k).map(|i| UploadPackage::full(i as u32, 1, vals.clone())).collect();
            let g = aggregate(&pkgs, &global(vec![0.0; vals.len()], k)).unwrap();
            prop_assert_eq!(g.params, vals);
        }

        #[test]
        fn ratio_one_partial_equals_full(seed in 0u64..500, k in 1usize..5, n in 1usize..30) {
            let mut rng = seed::rng(seed);
            let prev: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let models: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let full: Vec<_> = models.iter().enumerate().map(|(i, m)| UploadPackage::full(i as u32, 1, m.clone())).collect();
            let partial: Vec<_> = models.iter().enumerate().map(|(i, m)| select_partial(i as u32, 1, m, &prev, 1.0).unwrap()).collect();
            let g = global(prev, k);
            prop_assert_eq!(aggregate(&full, &g).unwrap(), aggregate(&partial, &g).unwrap());
        }

        #[test]
        fn aggregation_is_permutation_invariant(seed in 0u64..500, k in 2usize..6) {
            let mut rng = seed::rng(seed);
            let prev: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut pkgs: Vec<_> = (0..k)
                .map(|i| {
                    let m: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
                    select_partial(i as u32, 1, &m, &prev, 0.4).unwrap()
                })
                .collect();
            let g = global(prev, k);
            let a = aggregate(&pkgs, &g).unwrap();
            pkgs.reverse();
            pkgs.swap(0, k / 2);
            prop_assert_eq!(a, aggregate(&pkgs, &g).unwrap());
        }
    }
}
