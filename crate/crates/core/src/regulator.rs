//! Distribution regulator: MOS density estimation and the inverse-density pair
//! factor that down-weights over-represented quality levels.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, CANONICAL_MAX};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_BANDWIDTH: f64 = 5.0;
pub const DEFAULT_FLOOR: f64 = 1e-6;

/// Number of evenly spaced points used to normalize binned densities to mean 1.
const NORMALIZATION_GRID: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Gaussian kernels centred on every sample with that sample's own σ.
    PerSampleKde,
    /// Bin frequencies convolved with a fixed-bandwidth Gaussian.
    BinnedKernelSmoothed,
    /// Bin frequencies used directly (the no-smoothing ablation).
    RawBinned,
}

impl DensityMode {
    /// Per-sample KDE when every σ came from the score file, otherwise binned.
    pub fn auto(ds: &Dataset, kernel_smoothing: bool) -> Self {
        if !kernel_smoothing {
            DensityMode::RawBinned
        } else if ds.all_sigma_provided() {
            DensityMode::PerSampleKde
        } else {
            DensityMode::BinnedKernelSmoothed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityModel {
    mode: DensityMode,
    bins: usize,
    bandwidth: f64,
    floor: f64,
    /// Bin frequencies summing to 1 (binned modes only).
    bin_freq: Vec<f64>,
    /// `(q, σ)` of every sample (per-sample mode only).
    kernels: Vec<(f64, f64)>,
    /// Divisor that brings the mean binned density over `[0, 100]` to 1.
    scale: f64,
}

/// Fits a density model with the default floor.
pub fn fit_density(ds: &Dataset, mode: DensityMode, bins: usize, bandwidth: f64) -> Result<DensityModel> {
    DensityModel::fit(ds, mode, bins, bandwidth, DEFAULT_FLOOR)
}

impl DensityModel {
    pub fn fit(ds: &Dataset, mode: DensityMode, bins: usize, bandwidth: f64, floor: f64) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if bins == 0 {
            return Err(Error::Config("density bins must be positive".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!(
                "density bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !(floor > 0.0) {
            return Err(Error::Config(format!(
                "density floor must be positive, got {floor}"
            )));
        }
        let mut model = DensityModel {
            mode,
            bins,
            bandwidth,
            floor,
            bin_freq: Vec::new(),
            kernels: Vec::new(),
            scale: 1.0,
        };
        match mode {
            DensityMode::PerSampleKde => {
                model.kernels = ds.samples().iter().map(|s| (s.mos, s.sigma)).collect();
            }
            DensityMode::BinnedKernelSmoothed | DensityMode::RawBinned => {
                let mut counts = vec![0usize; bins];
                for s in ds.samples() {
                    counts[model.bin_index(s.mos)] += 1;
                }
                let n = ds.len() as f64;
                model.bin_freq = counts.iter().map(|&c| c as f64 / n).collect();
                let step = CANONICAL_MAX / NORMALIZATION_GRID as f64;
                let mean = (0..NORMALIZATION_GRID)
                    .map(|g| model.unnormalized((g as f64 + 0.5) * step))
                    .sum::<f64>()
                    / NORMALIZATION_GRID as f64;
                model.scale = mean;
            }
        }
        Ok(model)
    }

    pub fn mode(&self) -> DensityMode {
        self.mode
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn bin_freq(&self) -> &[f64] {
        &self.bin_freq
    }

    fn bin_width(&self) -> f64 {
        CANONICAL_MAX / self.bins as f64
    }

    /// Bin holding `q`; the top edge belongs to the last bin.
    pub fn bin_index(&self, q: f64) -> usize {
        let idx = (q / self.bin_width()).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(self.bins - 1)
        }
    }

    fn bin_center(&self, y: usize) -> f64 {
        (y as f64 + 0.5) * self.bin_width()
    }

    fn unnormalized(&self, q: f64) -> f64 {
        match self.mode {
            DensityMode::PerSampleKde => {
                let sum: f64 = self
                    .kernels
                    .iter()
                    .map(|&(qu, su)| {
                        let d = qu - q;
                        (-(d * d) / (2.0 * su * su)).exp()
                    })
                    .sum();
                sum / self.kernels.len() as f64
            }
            DensityMode::BinnedKernelSmoothed => {
                let two_h2 = 2.0 * self.bandwidth * self.bandwidth;
                self.bin_freq
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| **f > 0.0)
                    .map(|(y, f)| {
                        let d = q - self.bin_center(y);
                        (-(d * d) / two_h2).exp() * f
                    })
                    .sum()
            }
            DensityMode::RawBinned => self.bin_freq[self.bin_index(q)],
        }
    }

    /// Density at `q`, never below the floor.
    pub fn density(&self, q: f64) -> f64 {
        (self.unnormalized(q) / self.scale).max(self.floor)
    }

    /// Stable hex digest of the fitted state.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!(
            "{:?}|{}|{}|{}|{}",
            self.mode, self.bins, self.bandwidth, self.floor, self.scale
        ));
        for f in &self.bin_freq {
            h.update(f.to_le_bytes());
        }
        for (q, s) in &self.kernels {
            h.update(q.to_le_bytes());
            h.update(s.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Inverse-density pair factor `1 / (D(q_i) D(q_j))`.
pub fn p_t(dm: &DensityModel, q_i: f64, q_j: f64) -> f64 {
    1.0 / (dm.density(q_i) * dm.density(q_j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sample, SigmaSource};
    use rand::{Rng, SeedableRng};

    fn dataset(mos: &[f64], sigma: f64) -> Dataset {
        let samples = mos
            .iter()
            .enumerate()
            .map(|(i, &q)| Sample {
                id: i.to_string(),
                pred: i as f64,
                mos: q,
                sigma,
                sigma_source: SigmaSource::Provided,
            })
            .collect();
        Dataset::from_normalized(samples, (0.0, 100.0)).unwrap()
    }

    #[test]
    fn single_kernel_peak() {
        let ds = dataset(&[50.0, 50.0, 50.0], 1.0);
        let dm = fit_density(&ds, DensityMode::PerSampleKde, 100, 5.0).unwrap();
        assert_eq!(dm.density(50.0), 1.0);
    }

    #[test]
    fn per_sample_kde_matches_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<Sample> = (0..200)
            .map(|i| Sample {
                id: i.to_string(),
                pred: 0.0,
                mos: rng.random_range(0.0..100.0),
                sigma: rng.random_range(1.0..15.0),
                sigma_source: SigmaSource::Provided,
            })
            .collect();
        let ds = Dataset::from_normalized(samples.clone(), (0.0, 100.0)).unwrap();
        let dm = fit_density(&ds, DensityMode::PerSampleKde, 100, 5.0).unwrap();
        for q in [0.0, 13.3, 50.0, 99.9] {
            let mut acc = 0.0;
            for s in &samples {
                acc += (-(s.mos - q).powi(2) / (2.0 * s.sigma.powi(2))).exp();
            }
            let brute = (acc / 200.0).max(DEFAULT_FLOOR);
            assert!((dm.density(q) - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_bins_give_flat_interior_density() {
        let mos: Vec<f64> = (0..100).map(|y| y as f64 + 0.5).collect();
        let dm = fit_density(&dataset(&mos, 3.0), DensityMode::BinnedKernelSmoothed, 100, 5.0).unwrap();
        assert!((dm.bin_freq().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mid = dm.density(50.0);
        for q in (20..=80).map(f64::from) {
            assert!((dm.density(q) / mid - 1.0).abs() < 0.01);
        }
        assert!(dm.density(0.0) < 0.8 * mid);
    }

    #[test]
    fn raw_binned_empty_bin_hits_floor() {
        let ds = dataset(&[10.2, 10.7, 30.0, 90.0], 3.0);
        let dm = fit_density(&ds, DensityMode::RawBinned, 100, 5.0).unwrap();
        assert_eq!(dm.density(55.5), DEFAULT_FLOOR);
        // two of four samples in one of 100 bins: 0.5 / mean(0.01)
        assert!((dm.density(10.5) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn p_t_arithmetic() {
        let mos: Vec<f64> = (0..100).map(|y| y as f64 + 0.5).collect();
        let dm = fit_density(&dataset(&mos, 3.0), DensityMode::RawBinned, 100, 5.0).unwrap();
        assert!((p_t(&dm, 3.5, 77.5) - 1.0).abs() < 1e-12);

        let ds = dataset(&[10.0, 10.0, 10.0], 0.01);
        let dm = fit_density(&ds, DensityMode::PerSampleKde, 100, 5.0).unwrap();
        assert!((p_t(&dm, 90.0, 95.0) - 1e12).abs() < 1.0);
    }

    #[test]
    fn heavier_bins_get_higher_density() {
        let mut mos = vec![];
        mos.extend(std::iter::repeat(30.5).take(20));
        mos.extend(std::iter::repeat(70.5).take(5));
        let dm = fit_density(&dataset(&mos, 3.0), DensityMode::BinnedKernelSmoothed, 100, 5.0).unwrap();
        assert!(dm.density(30.5) > dm.density(70.5));
        assert!(p_t(&dm, 30.5, 30.5) < p_t(&dm, 70.5, 70.5));
    }

    #[test]
    fn smoothed_density_is_lipschitz() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mos: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..100.0)).collect();
        let h = 5.0;
        let dm = fit_density(&dataset(&mos, 3.0), DensityMode::BinnedKernelSmoothed, 100, h).unwrap();
        // |d/dq exp(-x²/2h²)| ≤ e^{-1/2}/h, and the frequencies sum to one.
        let lipschitz = (-0.5f64).exp() / h / dm.scale;
        let delta = 1e-4;
        for k in 0..1000 {
            let q = k as f64 * 0.1;
            assert!((dm.density(q) - dm.density(q + delta)).abs() <= lipschitz * delta * (1.0 + 1e-9));
        }
    }

    #[test]
    fn uniform_data_keeps_p_t_in_sanity_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mos: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..100.0)).collect();
        let dm = fit_density(&dataset(&mos, 3.0), DensityMode::BinnedKernelSmoothed, 100, 5.0).unwrap();
        for q in (15..=85).map(f64::from) {
            let pt = p_t(&dm, q, q);
            assert!((0.5..=2.0).contains(&pt), "p_t({q}) = {pt}");
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let ds = dataset(&[1.0, 2.0, 3.0], 1.0);
        assert!(fit_density(&ds, DensityMode::BinnedKernelSmoothed, 0, 5.0).is_err());
        assert!(fit_density(&ds, DensityMode::BinnedKernelSmoothed, 10, 0.0).is_err());
    }

    #[test]
    fn fingerprint_tracks_data() {
        let a = fit_density(
            &dataset(&[1.0, 2.0, 3.0], 1.0),
            DensityMode::BinnedKernelSmoothed,
            100,
            5.0,
        )
        .unwrap();
        let b = fit_density(
            &dataset(&[1.0, 2.0, 80.0], 1.0),
            DensityMode::BinnedKernelSmoothed,
            100,
            5.0,
        )
        .unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
