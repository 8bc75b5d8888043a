//! Beer-Lambert Poisson measurement simulation and log-linearization.
//!
//! Counts are drawn per bin from Poisson(I0 * exp(-(A x)_i)) with a
//! counter-based substream per bin, so results are independent of how the
//! sinogram is chunked across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RevError};
use crate::image::Image;
use crate::projector::{forward_project, FanBeamGeometry, Sinogram};

/// Incident photon count, expressed as mantissa * 10^exponent to keep
/// values like 2 x 10^3.5 unambiguous in configs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    pub i0_mantissa: f64,
    pub i0_exponent: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noiseless: bool,
}

impl DoseModel {
    pub fn new(i0_mantissa: f64, i0_exponent: f64, seed: u64, noiseless: bool) -> Result<Self> {
        let m = DoseModel {
            i0_mantissa,
            i0_exponent,
            seed,
            noiseless,
        };
        if !(m.i0() > 0.0) || !m.i0().is_finite() {
            return Err(RevError::InvalidArgument(format!(
                "incident photon count must be positive, got {}",
                m.i0()
            )));
        }
        Ok(m)
    }

    pub fn i0(&self) -> f64 {
        self.i0_mantissa * 10f64.powf(self.i0_exponent)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

// ln(k!) via table for small k and a 4-term Stirling series above.
fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 10] = [
        0.0,
        0.0,
        0.6931471805599453,
        1.791759469228055,
        3.1780538303479458,
        4.787491742782046,
        6.579251212010101,
        8.525161361065415,
        10.60460290274525,
        12.801827480081469,
    ];
    if k < 10 {
        return TABLE[k as usize];
    }
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// Poisson draw: inversion by sequential search for small means, PTRS
/// transformed rejection (Hormann 1993) otherwise.
pub fn poisson(mean: f64, rng: &mut impl Rng) -> u64 {
    debug_assert!(mean >= 0.0 && mean.is_finite());
    if mean == 0.0 {
        return 0;
    }
    if mean < 30.0 {
        // inversion via exponential inter-arrival products
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut prod: f64 = rng.gen();
        while prod > limit {
            k += 1;
            prod *= rng.gen::<f64>();
        }
        return k;
    }
    // PTRS
    let b = 0.931 + 2.53 * mean.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let ln_mean = mean.ln();
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let kf = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if kf < 0.0 {
            continue;
        }
        let k = kf as u64;
        if us >= 0.07 && v <= v_r {
            return k;
        }
        if us < 0.013 && v > us {
            continue;
        }
        let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
        if lhs <= kf * ln_mean - mean - ln_factorial(k) {
            return k;
        }
    }
}

/// Expected transmitted counts I0 * exp(-A x) per bin.
pub fn mean_counts(geom: &FanBeamGeometry, x_true: &Image, dose: &DoseModel) -> Result<Sinogram> {
    let proj = forward_project(geom, x_true)?;
    let i0 = dose.i0();
    let data = proj.data().iter().map(|&v| i0 * (-v).exp()).collect();
    Sinogram::new(geom.num_views, geom.num_detectors, data)
}

/// Simulate transmission counts. Noisy mode draws Poisson per bin from its
/// own seeded substream; noiseless mode returns the means themselves.
pub fn simulate_counts(
    geom: &FanBeamGeometry,
    x_true: &Image,
    dose: &DoseModel,
) -> Result<Sinogram> {
    if x_true.data().iter().any(|&v| v < 0.0) {
        return Err(RevError::InvalidArgument(
            "attenuation image must be nonnegative".into(),
        ));
    }
    let means = mean_counts(geom, x_true, dose)?;
    if dose.noiseless {
        return Ok(means);
    }
    let seed = dose.seed;
    let data: Vec<f64> = means
        .data()
        .par_iter()
        .enumerate()
        .map(|(bin, &mu)| {
            let stream = splitmix64(seed ^ splitmix64(bin as u64 + 1));
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            poisson(mu, &mut rng) as f64
        })
        .collect();
    Sinogram::new(geom.num_views, geom.num_detectors, data)
}

/// Linearize counts: b_i = -ln(max(counts_i, 1) / I0). The one-photon floor
/// keeps zero-count bins finite at low dose.
pub fn log_linearize(counts: &Sinogram, dose: &DoseModel) -> Result<Sinogram> {
    if counts.data().iter().any(|&v| v < 0.0) {
        return Err(RevError::InvalidArgument(
            "counts must be nonnegative".into(),
        ));
    }
    let i0 = dose.i0();
    let data = counts
        .data()
        .iter()
        .map(|&c| -(c.max(1.0) / i0).ln())
        .collect();
    Sinogram::new(counts.num_views(), counts.num_detectors(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{rmsd, shepp_logan, Image};
    use rand::SeedableRng;

    fn small_geom(n: usize, views: usize, dets: usize) -> FanBeamGeometry {
        FanBeamGeometry::with_fan_covering_image(n, 1.0, views, dets).unwrap()
    }

    #[test]
    fn zero_image_means_equal_i0() {
        let geom = small_geom(8, 4, 8);
        let dose = DoseModel::new(2.0, 3.5, 0, true).unwrap();
        let s = simulate_counts(&geom, &Image::zeros(8, 8), &dose).unwrap();
        let i0 = dose.i0();
        for &v in s.data() {
            assert_eq!(v, i0);
        }
    }

    #[test]
    fn noiseless_counts_match_definition() {
        let geom = small_geom(16, 6, 12);
        let x = shepp_logan(16).unwrap();
        let dose = DoseModel::new(1.0, 6.0, 0, true).unwrap();
        let counts = simulate_counts(&geom, &x, &dose).unwrap();
        let proj = forward_project(&geom, &x).unwrap();
        for (c, p) in counts.data().iter().zip(proj.data()) {
            assert_eq!(*c, dose.i0() * (-p).exp());
        }
    }

    #[test]
    fn noiseless_composition_identity() {
        let geom = small_geom(16, 6, 12);
        let x = shepp_logan(16).unwrap();
        // dose high enough that no mean falls under the one-photon floor
        let dose = DoseModel::new(1.0, 12.0, 0, true).unwrap();
        let counts = simulate_counts(&geom, &x, &dose).unwrap();
        let b = log_linearize(&counts, &dose).unwrap();
        let proj = forward_project(&geom, &x).unwrap();
        for (l, p) in b.data().iter().zip(proj.data()) {
            assert!((l - p).abs() <= 1e-12 * p.abs().max(1.0), "{l} vs {p}");
        }
    }

    #[test]
    fn negative_image_rejected() {
        let geom = small_geom(8, 4, 8);
        let dose = DoseModel::new(1.0, 4.0, 0, false).unwrap();
        let x = Image::new(8, 8, {
            let mut v = vec![0.1; 64];
            v[5] = -0.1;
            v
        })
        .unwrap();
        assert!(simulate_counts(&geom, &x, &dose).is_err());
    }

    #[test]
    fn zero_count_bin_floors_to_log_i0() {
        let dose = DoseModel::new(1.0, 3.0, 0, false).unwrap();
        let counts = Sinogram::new(1, 2, vec![0.0, 1000.0]).unwrap();
        let b = log_linearize(&counts, &dose).unwrap();
        assert!((b.data()[0] - dose.i0().ln()).abs() < 1e-12);
        assert!(b.data()[1].abs() < 1e-12);
    }

    #[test]
    fn counts_are_nonnegative_integers() {
        let geom = small_geom(16, 6, 12);
        let x = shepp_logan(16).unwrap();
        let dose = DoseModel::new(2.0, 3.5, 11, false).unwrap();
        let counts = simulate_counts(&geom, &x, &dose).unwrap();
        for &v in counts.data() {
            assert!(v >= 0.0);
            assert_eq!(v, v.round());
        }
    }

    #[test]
    fn determinism_per_seed() {
        let geom = small_geom(16, 6, 12);
        let x = shepp_logan(16).unwrap();
        let dose = DoseModel::new(2.0, 3.5, 21, false).unwrap();
        let a = simulate_counts(&geom, &x, &dose).unwrap();
        let b = simulate_counts(&geom, &x, &dose).unwrap();
        assert_eq!(a.data(), b.data());
        let dose2 = DoseModel::new(2.0, 3.5, 22, false).unwrap();
        let c = simulate_counts(&geom, &x, &dose2).unwrap();
        assert_ne!(a.data(), c.data());
    }

    // Poisson moment checks for both sampler branches.
    #[test]
    fn poisson_empirical_mean_within_4_sigma() {
        for &mu in &[0.5f64, 3.0, 12.0, 45.0, 300.0, 6325.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(mu.to_bits());
            let n = 100_000;
            let sum: f64 = (0..n).map(|_| poisson(mu, &mut rng) as f64).sum();
            let mean = sum / n as f64;
            let tol = 4.0 * (mu / n as f64).sqrt();
            assert!(
                (mean - mu).abs() < tol,
                "mu={mu}: empirical mean {mean}, tolerance {tol}"
            );
        }
    }

    #[test]
    fn poisson_empirical_variance_sane() {
        let mu = 50.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| poisson(mu, &mut rng) as f64).collect();
        let mean: f64 = draws.iter().sum::<f64>() / n as f64;
        let var: f64 = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        assert!((var - mu).abs() < 0.05 * mu, "variance {var}");
    }

    #[test]
    fn higher_dose_reduces_linearization_error() {
        let geom = small_geom(16, 6, 12);
        let x = shepp_logan(16).unwrap();
        let proj = forward_project(&geom, &x).unwrap();
        let ref_img = Image::new(
            geom.num_views,
            geom.num_detectors,
            proj.data().to_vec(),
        );
        // treat sinograms as images for the rmsd metric
        let ref_img = match ref_img {
            Ok(img) => img,
            Err(_) => unreachable!(),
        };
        let median_rmsd = |exp: f64| -> f64 {
            let mut vals: Vec<f64> = (0..20u64)
                .map(|seed| {
                    let dose = DoseModel::new(1.0, exp, seed, false).unwrap();
                    let counts = simulate_counts(&geom, &x, &dose).unwrap();
                    let b = log_linearize(&counts, &dose).unwrap();
                    let img = Image::new(geom.num_views, geom.num_detectors, b.data().to_vec())
                        .unwrap();
                    rmsd(&img, &ref_img).unwrap()
                })
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (vals[9] + vals[10]) / 2.0
        };
        let low = median_rmsd(3.0);
        let high = median_rmsd(6.0);
        assert!(high < low, "median rmsd at 1e6 ({high}) not below 1e3 ({low})");
    }
}
