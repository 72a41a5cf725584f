//! Flat Rayleigh channels for the legitimate users and a correlated
//! single-antenna eavesdropper, receiver noise, and seeded substreams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Generator used for every random draw in the crate.
pub type TrialRng = ChaCha8Rng;

/// A named family of per-trial random streams.
///
/// Trial `t` of substream `(seed, domain)` always receives the same
/// generator, independent of which worker thread executes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Substream {
    pub seed: u64,
    pub domain: u64,
}

impl Substream {
    pub fn new(seed: u64, domain: u64) -> Self {
        Self { seed, domain }
    }

    pub fn rng(&self, trial: u64) -> TrialRng {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.seed),
            splitmix64(self.domain ^ 0x5851_f42d_4c95_7f2d),
            splitmix64(trial.wrapping_add(0x1405_7b7e_f767_814f)),
            splitmix64(self.seed ^ self.domain.rotate_left(17) ^ trial.rotate_left(41)),
        ];
        for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&w.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Antenna/user counts, large-scale gains and eavesdropper correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGeometry {
    pub antennas: usize,
    pub users: usize,
    pub beta: Vec<f64>,
    pub beta_e: f64,
    pub rho: f64,
}

impl LinkGeometry {
    /// Unit large-scale gains for every node.
    pub fn new(antennas: usize, users: usize, rho: f64) -> Result<Self> {
        let g = Self {
            antennas,
            users,
            beta: vec![1.0; users],
            beta_e: 1.0,
            rho,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.users == 0 {
            return Err(Error::Argument("antennas and users must be positive".into()));
        }
        if self.beta.len() != self.users {
            return Err(Error::Dimension(format!(
                "{} large-scale gains for {} users",
                self.beta.len(),
                self.users
            )));
        }
        if self.beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) || !(self.beta_e > 0.0) {
            return Err(Error::Argument("large-scale gains must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Argument(format!("rho = {} outside [0, 1]", self.rho)));
        }
        Ok(())
    }
}

/// One draw of all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// K×N, row k is `h_kᵀ`.
    pub h: DMatrix<Complex64>,
    pub h_e: DVector<Complex64>,
    pub beta: Vec<f64>,
    pub beta_e: f64,
    pub rho: f64,
}

impl ChannelRealization {
    pub fn user_channel(&self, k: usize) -> DVector<Complex64> {
        self.h.row(k).transpose()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }
}

fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// i.i.d. `CN(0, variance)` entries.
pub fn sample_complex_gaussian<R: Rng + ?Sized>(
    len: usize,
    variance: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(variance >= 0.0) {
        return Err(Error::Argument(format!("variance {variance} is negative")));
    }
    let sd = variance.sqrt();
    Ok(DVector::from_fn(len, |_, _| standard_complex(rng) * sd))
}

/// `h_e = √βe (√ρ h₁/√β₁ + √(1−ρ) w)` with a fresh `w ~ CN(0, I)`.
pub fn sample_eve_correlated<R: Rng + ?Sized>(
    h1: &DVector<Complex64>,
    beta1: f64,
    beta_e: f64,
    rho: f64,
    rng: &mut R,
) -> Result<DVector<Complex64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Argument(format!("rho = {rho} outside [0, 1]")));
    }
    if !(beta1 > 0.0) || !(beta_e > 0.0) {
        return Err(Error::Argument("large-scale gains must be positive".into()));
    }
    let w = sample_complex_gaussian(h1.len(), 1.0, rng)?;
    let a = (beta_e * rho / beta1).sqrt();
    let c = (beta_e * (1.0 - rho)).sqrt();
    Ok(h1.map(|v| v * a) + w.map(|v| v * c))
}

/// Unit-variance circular complex Gaussian noise sample.
pub fn sample_noise<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    standard_complex(rng)
}

/// Legitimate channels row by row, then the eavesdropper channel.
pub fn sample_realization<R: Rng + ?Sized>(
    geom: &LinkGeometry,
    rng: &mut R,
) -> Result<ChannelRealization> {
    geom.validate()?;
    let n = geom.antennas;
    let mut h = DMatrix::zeros(geom.users, n);
    for k in 0..geom.users {
        let row = sample_complex_gaussian(n, geom.beta[k], rng)?;
        h.set_row(k, &row.transpose());
    }
    let h1 = h.row(0).transpose();
    let h_e = sample_eve_correlated(&h1, geom.beta[0], geom.beta_e, geom.rho, rng)?;
    Ok(ChannelRealization {
        h,
        h_e,
        beta: geom.beta.clone(),
        beta_e: geom.beta_e,
        rho: geom.rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn zero_variance_gives_zero_vector() {
        let mut rng = Substream::new(1, 0).rng(0);
        let v = sample_complex_gaussian(5, 0.0, &mut rng).unwrap();
        assert!(v.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
        assert!(sample_complex_gaussian(5, -1.0, &mut rng).is_err());
    }

    #[test]
    fn unit_variance_moment() {
        let mut rng = Substream::new(2, 0).rng(0);
        let v = sample_complex_gaussian(100_000, 1.0, &mut rng).unwrap();
        let var = v.norm_squared() / v.len() as f64;
        assert!((0.98..=1.02).contains(&var), "{var}");
        let re_var = v.iter().map(|z| z.re * z.re).sum::<f64>() / v.len() as f64;
        assert!((0.49..=0.51).contains(&re_var), "{re_var}");
    }

    #[test]
    fn same_substream_same_draws() {
        let s = Substream::new(42, 3);
        let a = sample_complex_gaussian(8, 1.0, &mut s.rng(17)).unwrap();
        let b = sample_complex_gaussian(8, 1.0, &mut s.rng(17)).unwrap();
        assert_eq!(a, b);
        let c = sample_complex_gaussian(8, 1.0, &mut s.rng(18)).unwrap();
        assert_ne!(a, c);
        let d = sample_complex_gaussian(8, 1.0, &mut Substream::new(42, 4).rng(17)).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn full_correlation_copies_user_one() {
        let mut rng = Substream::new(5, 0).rng(0);
        let h1 = sample_complex_gaussian(6, 1.0, &mut rng).unwrap();
        let he = sample_eve_correlated(&h1, 1.0, 1.0, 1.0, &mut rng).unwrap();
        assert_abs_diff_eq!((he - &h1).norm(), 0.0, epsilon = 1e-15);

        let h1 = sample_complex_gaussian(6, 2.5, &mut rng).unwrap();
        let he = sample_eve_correlated(&h1, 2.5, 2.5, 1.0, &mut rng).unwrap();
        assert_abs_diff_eq!((he - &h1).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_out_of_range_rejected() {
        let mut rng = Substream::new(5, 0).rng(0);
        let h1 = sample_complex_gaussian(2, 1.0, &mut rng).unwrap();
        assert!(sample_eve_correlated(&h1, 1.0, 1.0, 1.5, &mut rng).is_err());
        assert!(sample_eve_correlated(&h1, 1.0, 1.0, -0.1, &mut rng).is_err());
    }

    fn cross_correlation(rho: f64, draws: usize) -> (f64, f64) {
        let s = Substream::new(9, 1);
        let mut rng = s.rng(0);
        let mut cross = Complex64::new(0.0, 0.0);
        let mut energy = 0.0;
        for _ in 0..draws {
            let h1 = sample_complex_gaussian(6, 1.0, &mut rng).unwrap();
            let he = sample_eve_correlated(&h1, 1.0, 1.0, rho, &mut rng).unwrap();
            cross += he[0] * h1[0].conj();
            energy += he.norm_squared();
        }
        ((cross / draws as f64).norm(), energy / draws as f64)
    }

    #[test]
    fn independent_when_uncorrelated() {
        let (corr, _) = cross_correlation(0.0, 100_000);
        assert!(corr < 0.02, "{corr}");
    }

    #[test]
    fn correlation_and_energy_identities() {
        for rho in [0.0, 0.3, 0.7, 1.0] {
            let (corr, energy) = cross_correlation(rho, 100_000);
            assert!((energy / 6.0 - 1.0).abs() < 0.02, "rho {rho}: {energy}");
            assert!((corr - rho.sqrt()).abs() < 0.02, "rho {rho}: {corr}");
        }
    }

    #[test]
    fn noise_moments_and_uniform_phase() {
        let mut rng = Substream::new(77, 2).rng(0);
        let n = 100_000;
        let bins = 20;
        let mut counts = vec![0usize; bins];
        let mut power = 0.0;
        for _ in 0..n {
            let z = sample_noise(&mut rng);
            power += z.norm_sqr();
            let th = crate::geometry::wrap_phase(z.arg());
            counts[((th / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let p = power / n as f64;
        assert!((0.98..=1.02).contains(&p), "{p}");
        let expect = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expect).powi(2) / expect)
            .sum();
        // chi-square 99th percentile with 19 degrees of freedom
        assert!(chi2 < 36.19, "{chi2}");
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let s = Substream::new(3, 3);
        assert_eq!(sample_noise(&mut s.rng(5)), sample_noise(&mut s.rng(5)));
    }

    #[test]
    fn realization_shapes() {
        let geom = LinkGeometry::new(6, 3, 0.3).unwrap();
        let r = sample_realization(&geom, &mut Substream::new(1, 1).rng(0)).unwrap();
        assert_eq!(r.h.shape(), (3, 6));
        assert_eq!(r.h_e.len(), 6);
        assert_eq!(r.user_channel(1), r.h.row(1).transpose());
    }

    #[test]
    fn geometry_validation() {
        assert!(LinkGeometry::new(0, 3, 0.3).is_err());
        assert!(LinkGeometry::new(6, 3, 1.2).is_err());
        let mut g = LinkGeometry::new(6, 3, 0.3).unwrap();
        g.beta = vec![1.0, 1.0];
        assert!(g.validate().is_err());
    }
}
