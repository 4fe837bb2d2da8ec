//! Terahertz channel model: spreading and molecular-absorption loss, ULA
//! steering vectors, NLoS reflection factors and the limited-CSI mask.

use std::f64::consts::PI;
use std::ops::Index;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier and array parameters shared by every link of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Carrier frequency (Hz).
    pub freq_hz: f64,
    /// Medium absorption factor (1/m).
    pub rho: f64,
    /// Integrated antenna gain (dB).
    pub gain_db: f64,
    pub num_nlos: usize,
    /// Element spacing (m).
    pub antenna_spacing: f64,
    pub num_antennas: usize,
    /// Magnitude range of the NLoS reflection factors.
    pub nlos_mag_range: (f64, f64),
}

impl ChannelParams {
    /// Parameters at 0.3 THz with half-wavelength spacing: rho = 0.1, G = 10 dB, L = 5.
    pub fn thz_default(num_antennas: usize) -> Self {
        let freq_hz = 0.3e12;
        Self {
            freq_hz,
            rho: 0.1,
            gain_db: 10.0,
            num_nlos: 5,
            antenna_spacing: SPEED_OF_LIGHT / freq_hz / 2.0,
            num_antennas,
            nlos_mag_range: (0.01, 0.1),
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.freq_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.freq_hz > 0.0) {
            return Err(Error::Config(format!("frequency must be > 0, got {}", self.freq_hz)));
        }
        if !(self.rho >= 0.0) {
            return Err(Error::Config(format!("rho must be >= 0, got {}", self.rho)));
        }
        if self.num_antennas == 0 {
            return Err(Error::Config("num_antennas must be >= 1".into()));
        }
        if !(self.antenna_spacing > 0.0) {
            return Err(Error::Config("antenna_spacing must be > 0".into()));
        }
        check_mag_range(self.nlos_mag_range)
    }
}

/// Distance and angle of departure of one BS -> UE link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    /// Angle of departure in [-pi/2, pi/2].
    pub aod: f64,
}

/// Complex reflection/roughness factors of the NLoS paths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NlosFactors(pub Vec<Complex64>);

impl NlosFactors {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Complex channel vector of one BS -> UE link, one entry per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Hermitian inner product `self^H w`.
    pub fn hdot(&self, w: &[Complex64]) -> Complex64 {
        hdot(&self.0, w)
    }
}

impl Index<usize> for ChannelVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// `h^H w` over equal-length slices.
pub fn hdot(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Spreading and absorption loss `c / (4 pi f d) * exp(-rho d / 2)`.
pub fn spread_loss(params: &ChannelParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be > 0, got {distance}")));
    }
    Ok(SPEED_OF_LIGHT / (4.0 * PI * params.freq_hz * distance) * (-0.5 * params.rho * distance).exp())
}

/// ULA steering vector with the `1/N` prefactor: every entry has magnitude
/// `1/N`, so the vector norm is `1/sqrt(N)`.
pub fn steering_vector(theta: f64, n: usize, spacing: f64, wavelength: f64) -> Vec<Complex64> {
    let amp = 1.0 / n as f64;
    let step = 2.0 * PI / wavelength * spacing * theta.sin();
    (0..n)
        .map(|i| Complex64::from_polar(amp, step * i as f64))
        .collect()
}

/// `h = G [1 + sum_l Lambda_l] a_L(f, d) a_t(theta)`. A single steering
/// vector scales both the LoS and the NLoS terms.
pub fn channel_response(
    params: &ChannelParams,
    geom: &LinkGeometry,
    nlos: &NlosFactors,
) -> Result<ChannelVector> {
    if nlos.len() != params.num_nlos {
        return Err(Error::Dimension {
            expected: params.num_nlos,
            actual: nlos.len(),
        });
    }
    let gain = 10f64.powf(params.gain_db / 10.0);
    let bracket = Complex64::new(1.0, 0.0) + nlos.0.iter().sum::<Complex64>();
    let scale = bracket * gain * spread_loss(params, geom.distance)?;
    let a = steering_vector(
        geom.aod,
        params.num_antennas,
        params.antenna_spacing,
        params.wavelength(),
    );
    Ok(ChannelVector(a.into_iter().map(|z| z * scale).collect()))
}

fn check_mag_range((lo, hi): (f64, f64)) -> Result<()> {
    if !(lo >= 0.0 && lo <= hi && hi < 1.0) {
        return Err(Error::Config(format!(
            "NLoS magnitude range must satisfy 0 <= min <= max < 1, got [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Draw `count` reflection factors: magnitude uniform in `mag_range`,
/// phase uniform in `[0, 2 pi)`.
pub fn draw_nlos<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    mag_range: (f64, f64),
) -> Result<NlosFactors> {
    check_mag_range(mag_range)?;
    let (lo, hi) = mag_range;
    let factors = (0..count)
        .map(|_| {
            let mag = if lo == hi { lo } else { rng.random_range(lo..hi) };
            let phase = rng.random_range(0.0..2.0 * PI);
            Complex64::from_polar(mag, phase)
        })
        .collect();
    Ok(NlosFactors(factors))
}

/// Number of antennas whose CSI is estimated for fraction `eta`.
pub fn estimated_len(n: usize, eta: f64) -> usize {
    ((eta * n as f64).ceil() as usize).min(n)
}

/// Prefix mask: keep the first `ceil(eta N)` entries, zero the rest.
pub fn limited_csi(h: &ChannelVector, eta: f64) -> ChannelVector {
    let keep = estimated_len(h.len(), eta.clamp(0.0, 1.0));
    let mut out = h.clone();
    for z in &mut out.0[keep..] {
        *z = Complex64::new(0.0, 0.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;

    fn params(n: usize, l: usize) -> ChannelParams {
        let mut p = ChannelParams::thz_default(n);
        p.num_nlos = l;
        p
    }

    #[test]
    fn spread_loss_reference_value() {
        // c/(4 pi f d) e^{-rho d/2} evaluated in double precision by hand.
        let v = spread_loss(&params(1, 0), 10.0).unwrap();
        assert!((v - 4.823278545247771e-6).abs() < 1e-18, "{v}");
    }

    #[test]
    fn spread_loss_zero_absorption() {
        let mut p = params(1, 0);
        p.rho = 0.0;
        let v = spread_loss(&p, 25.0).unwrap();
        assert_eq!(v, SPEED_OF_LIGHT / (4.0 * PI * p.freq_hz * 25.0));
    }

    #[test]
    fn spread_loss_rejects_bad_distance() {
        assert!(matches!(spread_loss(&params(1, 0), 0.0), Err(Error::Domain(_))));
        assert!(matches!(spread_loss(&params(1, 0), -3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn spread_loss_decays_with_distance() {
        let p = params(1, 0);
        assert!(spread_loss(&p, 100.0).unwrap() < spread_loss(&p, 10.0).unwrap());
    }

    #[test]
    fn steering_broadside() {
        let a = steering_vector(0.0, 4, 0.5, 1.0);
        for z in a {
            assert_eq!(z, Complex64::new(0.25, 0.0));
        }
        assert_eq!(steering_vector(0.7, 1, 0.5, 1.0), vec![Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn steering_thirty_degrees_half_wavelength() {
        let a = steering_vector(PI / 6.0, 2, 0.5, 1.0);
        assert_eq!(a[0], Complex64::new(0.5, 0.0));
        assert!((a[1] - Complex64::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn channel_pure_los_unit_gain() {
        let mut p = params(4, 0);
        p.gain_db = 0.0;
        let g = LinkGeometry { distance: 30.0, aod: 0.4 };
        let h = channel_response(&p, &g, &NlosFactors::default()).unwrap();
        let al = spread_loss(&p, 30.0).unwrap();
        let a = steering_vector(0.4, 4, p.antenna_spacing, p.wavelength());
        for (x, y) in h.0.iter().zip(&a) {
            assert!((x - y * al).norm() <= 1e-15 * al);
        }
    }

    #[test]
    fn channel_cancelling_reflection_is_zero() {
        let p = params(3, 1);
        let g = LinkGeometry { distance: 10.0, aod: 0.2 };
        let h = channel_response(&p, &g, &NlosFactors(vec![Complex64::new(-1.0, 0.0)])).unwrap();
        assert!(h.0.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn channel_reference_single_antenna() {
        let p = params(1, 0);
        let g = LinkGeometry { distance: 10.0, aod: 0.0 };
        let h = channel_response(&p, &g, &NlosFactors::default()).unwrap();
        assert!((h[0].re - 4.823278545247771e-5).abs() < 1e-17);
        assert_eq!(h[0].im, 0.0);
    }

    #[test]
    fn channel_rejects_wrong_nlos_count() {
        let p = params(2, 3);
        let g = LinkGeometry { distance: 10.0, aod: 0.0 };
        assert!(channel_response(&p, &g, &NlosFactors::default()).is_err());
    }

    #[test]
    fn nlos_draws() {
        let mut rng = seed::rng(1);
        assert!(draw_nlos(&mut rng, 0, (0.01, 0.1)).unwrap().is_empty());
        let f = draw_nlos(&mut rng, 6, (0.05, 0.05)).unwrap();
        assert!(f.0.iter().all(|z| (z.norm() - 0.05).abs() < 1e-15));
        let a = draw_nlos(&mut seed::rng(9), 5, (0.01, 0.1)).unwrap();
        let b = draw_nlos(&mut seed::rng(9), 5, (0.01, 0.1)).unwrap();
        assert_eq!(a, b);
        assert!(a.0.iter().all(|z| z.norm() >= 0.01 - 1e-15 && z.norm() <= 0.1 + 1e-15));
        assert!(draw_nlos(&mut rng, 2, (0.2, 0.1)).is_err());
        assert!(draw_nlos(&mut rng, 2, (0.1, 1.0)).is_err());
    }

    #[test]
    fn csi_mask() {
        let h = ChannelVector((0..8).map(|i| Complex64::new(i as f64 + 1.0, -1.0)).collect());
        assert_eq!(limited_csi(&h, 1.0), h);
        assert!(limited_csi(&h, 0.0).0.iter().all(|z| z.norm() == 0.0));
        let half = limited_csi(&h, 0.5);
        assert_eq!(&half.0[..4], &h.0[..4]);
        assert!(half.0[4..].iter().all(|z| z.norm() == 0.0));
    }

    proptest! {
        #[test]
        fn spread_loss_monotone(d1 in 0.1f64..500.0, dd in 0.01f64..100.0, f in 1e10f64..1e13) {
            let mut p = params(1, 0);
            p.freq_hz = f;
            prop_assert!(spread_loss(&p, d1 + dd).unwrap() < spread_loss(&p, d1).unwrap());
            let mut q = p.clone();
            q.freq_hz = f * 1.5;
            prop_assert!(spread_loss(&q, d1).unwrap() < spread_loss(&p, d1).unwrap());
        }

        #[test]
        fn steering_entries_have_magnitude_one_over_n(theta in -PI / 2.0..PI / 2.0, n in 1usize..64) {
            let a = steering_vector(theta, n, 0.5e-3, 1e-3);
            prop_assert_eq!(a[0], Complex64::new(1.0 / n as f64, 0.0));
            for z in &a {
                prop_assert!((z.norm() - 1.0 / n as f64).abs() < 1e-15);
            }
        }

        #[test]
        fn mask_is_idempotent(vals in proptest::collection::vec(-1.0f64..1.0, 2..32), eta in 0.0f64..1.0) {
            let h = ChannelVector(vals.chunks(2).map(|c| Complex64::new(c[0], *c.get(1).unwrap_or(&0.0))).collect());
            let once = limited_csi(&h, eta);
            prop_assert_eq!(limited_csi(&once, eta), once);
        }
    }
}
