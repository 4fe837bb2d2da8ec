use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelVector;
use crate::env::{BeamformerSet, NetworkScenario};
use crate::error::{Error, Result};

/// Relative singular-value cutoff when building the interference subspace.
pub const PINV_TOL: f64 = 1e-12;

fn normalized(v: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Infeasible("beamformer direction vanished".into()));
    }
    Ok(v.into_iter().map(|z| z / norm).collect())
}

/// Matched filter `h / |h|`.
pub fn mrt_beamformer(h: &ChannelVector) -> Result<Vec<Complex64>> {
    if h.norm() == 0.0 {
        return Err(Error::Domain("MRT of a zero channel".into()));
    }
    normalized(h.0.clone())
}

/// Orthonormal basis (columns) of the span of `vectors`, dropping
/// directions whose singular value falls below `PINV_TOL * sigma_max`.
fn span_basis(vectors: &[&ChannelVector], n: usize) -> DMatrix<Complex64> {
    if vectors.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    // Columns are scaled to unit norm so the cutoff is scale-free.
    let m = DMatrix::from_fn(n, vectors.len(), |r, c| {
        let norm = vectors[c].norm();
        if norm > 0.0 {
            vectors[c][r] / norm
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| smax > 0.0 && svd.singular_values[i] > PINV_TOL * smax)
        .collect();
    DMatrix::from_fn(n, keep.len(), |r, c| u[(r, keep[c])])
}

fn project_out(basis: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    v - basis * (basis.adjoint() * v)
}

/// Per-BS zero forcing: BS `k` projects `h_kk` onto the orthogonal
/// complement of the channels towards the other UEs, `h_kj` for `j != k`.
pub fn zf_beamformers(scenario: &NetworkScenario) -> Result<BeamformerSet> {
    let (k, n) = (scenario.num_cells, scenario.num_antennas);
    if n < k {
        return Err(Error::Infeasible(format!("zero forcing needs N >= K, got N = {n}, K = {k}")));
    }
    let mut beams = Vec::with_capacity(k);
    for bs in 0..k {
        let others: Vec<&ChannelVector> = (0..k).filter(|&j| j != bs).map(|j| scenario.channel(bs, j)).collect();
        let basis = span_basis(&others, n);
        let h = DVector::from_column_slice(scenario.serving(bs).as_slice());
        // A second pass removes the residual left by the first.
        let w = project_out(&basis, &project_out(&basis, &h));
        beams.push(normalized(w.iter().copied().collect())?);
    }
    Ok(BeamformerSet(beams))
}

/// `(sum_j h_kj h_kj^H + alpha I)^{-1} h_kk`, unnormalized.
pub fn mmse_direction(scenario: &NetworkScenario, bs: usize, alpha: f64) -> Result<Vec<Complex64>> {
    let (k, n) = (scenario.num_cells, scenario.num_antennas);
    let mut a = DMatrix::<Complex64>::identity(n, n) * Complex64::new(alpha, 0.0);
    for j in 0..k {
        let h = DVector::from_column_slice(scenario.channel(bs, j).as_slice());
        a += &h * h.adjoint();
    }
    let rhs = DVector::from_column_slice(scenario.serving(bs).as_slice());
    let x = match a.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Infeasible("singular MMSE system".into()))?,
    };
    Ok(x.iter().copied().collect())
}

/// Regularized zero forcing with regularizer `sigma^2 / P`, unit power.
pub fn mmse_beamformers(scenario: &NetworkScenario) -> Result<BeamformerSet> {
    let alpha = scenario.noise_w / scenario.tx_power_w;
    (0..scenario.num_cells)
        .map(|bs| normalized(mmse_direction(scenario, bs, alpha)?))
        .collect::<Result<Vec<_>>>()
        .map(BeamformerSet)
}

/// I.i.d. complex Gaussian beams scaled to unit norm.
pub fn random_beams<R: Rng + ?Sized>(rng: &mut R, k: usize, n: usize) -> BeamformerSet {
    let beams = (0..k)
        .map(|_| loop {
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                .collect();
            if let Ok(w) = normalized(v) {
                break w;
            }
        })
        .collect();
    BeamformerSet(beams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{hdot, LinkGeometry};
    use crate::env::{rate, sinr};
    use crate::seed;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_scenario(rng: &mut impl Rng, k: usize, n: usize, p: f64, noise: f64) -> NetworkScenario {
        let channels = (0..k)
            .map(|_| {
                (0..k)
                    .map(|_| {
                        ChannelVector(
                            (0..n)
                                .map(|_| c(StandardNormal.sample(rng), StandardNormal.sample(rng)))
                                .collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        let geom = vec![vec![LinkGeometry { distance: 1.0, aod: 0.0 }; k]; k];
        NetworkScenario::new(channels, geom, p, noise, 1.0).unwrap()
    }

    fn cosine(a: &[Complex64], b: &[Complex64]) -> f64 {
        let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        hdot(a, b).norm() / (na * nb)
    }

    #[test]
    fn mrt_examples() {
        let w = mrt_beamformer(&ChannelVector(vec![c(1.0, 0.0), c(0.0, 0.0)])).unwrap();
        assert_eq!(w, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let w = mrt_beamformer(&ChannelVector(vec![c(3.0, 0.0), c(0.0, 4.0)])).unwrap();
        assert!((w[0] - c(0.6, 0.0)).norm() < 1e-15 && (w[1] - c(0.0, 0.8)).norm() < 1e-15);
        assert!(mrt_beamformer(&ChannelVector::zeros(3)).is_err());
    }

    #[test]
    fn mrt_beats_random_search_single_cell() {
        let mut rng = seed::rng(31);
        let s = random_scenario(&mut rng, 1, 6, 1.0, 1.0);
        let mrt = BeamformerSet(vec![mrt_beamformer(s.serving(0)).unwrap()]);
        let best = rate(sinr(&s, &mrt, 0).unwrap()).unwrap();
        for _ in 0..1000 {
            let w = random_beams(&mut rng, 1, 6);
            assert!(rate(sinr(&s, &w, 0).unwrap()).unwrap() <= best + 1e-12);
        }
    }

    #[test]
    fn zf_single_cell_is_mrt() {
        let mut rng = seed::rng(1);
        let s = random_scenario(&mut rng, 1, 4, 1.0, 1.0);
        let zf = zf_beamformers(&s).unwrap();
        let mrt = mrt_beamformer(s.serving(0)).unwrap();
        for (a, b) in zf.0[0].iter().zip(&mrt) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn zf_already_orthogonal() {
        let e0 = ChannelVector(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let e1 = ChannelVector(vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let geom = vec![vec![LinkGeometry { distance: 1.0, aod: 0.0 }; 2]; 2];
        let s = NetworkScenario::new(vec![vec![e0.clone(), e1.clone()], vec![e0, e1]], geom, 1.0, 1.0, 1.0).unwrap();
        let zf = zf_beamformers(&s).unwrap();
        assert!((zf.0[0][0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(zf.0[0][1].norm() < 1e-15);
    }

    #[test]
    fn zf_null_depth_and_feasibility() {
        let mut rng = seed::rng(2);
        for _ in 0..20 {
            let s = random_scenario(&mut rng, 2, 2, 1.0, 1.0);
            let zf = zf_beamformers(&s).unwrap();
            for k in 0..2 {
                let h = s.channel(k, 1 - k);
                let leak = h.hdot(zf.beam(k)).norm_sqr() / h.norm_sqr();
                assert!(leak < 1e-20, "leak {leak}");
                let norm: f64 = zf.beam(k).iter().map(|z| z.norm_sqr()).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
        let s = random_scenario(&mut rng, 3, 2, 1.0, 1.0);
        assert!(matches!(zf_beamformers(&s), Err(Error::Infeasible(_))));
    }

    #[test]
    fn mmse_limits() {
        let mut rng = seed::rng(3);
        let s = random_scenario(&mut rng, 3, 5, 1.0, 1.0);
        let zf = zf_beamformers(&s).unwrap();
        for k in 0..3 {
            let near_zf = mmse_direction(&s, k, 1e-8).unwrap();
            assert!(cosine(&near_zf, zf.beam(k)) > 0.999);
            let near_mrt = mmse_direction(&s, k, 1e8).unwrap();
            assert!(cosine(&near_mrt, s.serving(k).as_slice()) > 0.999999);
        }
        let one = random_scenario(&mut rng, 1, 4, 1.0, 0.3);
        let w = mmse_beamformers(&one).unwrap();
        let mrt = mrt_beamformer(one.serving(0)).unwrap();
        for (a, b) in w.0[0].iter().zip(&mrt) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn mmse_interpolates_monotonically() {
        let mut rng = seed::rng(4);
        let s = random_scenario(&mut rng, 3, 4, 1.0, 1.0);
        let zf = zf_beamformers(&s).unwrap();
        let mut prev_mrt = 0.0;
        let mut prev_zf = f64::INFINITY;
        for e in -4..=4 {
            let w = mmse_direction(&s, 0, 10f64.powi(e)).unwrap();
            let to_mrt = cosine(&w, s.serving(0).as_slice());
            let to_zf = cosine(&w, zf.beam(0));
            assert!(to_mrt >= prev_mrt - 1e-12, "alpha 1e{e}");
            assert!(to_zf <= prev_zf + 1e-12, "alpha 1e{e}");
            prev_mrt = to_mrt;
            prev_zf = to_zf;
        }
    }

    #[test]
    fn random_beams_are_unit_and_seeded() {
        let a = random_beams(&mut seed::rng(5), 3, 8);
        let b = random_beams(&mut seed::rng(5), 3, 8);
        assert_eq!(a, b);
        for w in &a.0 {
            let n: f64 = w.iter().map(|z| z.norm_sqr()).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn random_beams_lose_to_mrt() {
        let mut rng = seed::rng(6);
        let s = random_scenario(&mut rng, 1, 8, 1.0, 1.0);
        let mrt = BeamformerSet(vec![mrt_beamformer(s.serving(0)).unwrap()]);
        let best = rate(sinr(&s, &mrt, 0).unwrap()).unwrap();
        let mean: f64 = (0..1000)
            .map(|_| rate(sinr(&s, &random_beams(&mut rng, 1, 8), 0).unwrap()).unwrap())
            .sum::<f64>()
            / 1000.0;
        assert!(mean < best);
    }
}
