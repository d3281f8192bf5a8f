//! Synthetic workloads shared by the benchmarks.

use gmc_core::dataset::{estimate_sigma, Sample, SigmaSource, DEFAULT_PHI};
use gmc_core::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` samples with uniform MOS on [0, 100], Beta-estimated σ and
/// predictions off by up to ±`noise`.
pub fn noisy_dataset(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n)
        .map(|i| {
            let q: f64 = rng.random_range(0.0..100.0);
            Sample {
                id: i.to_string(),
                pred: q + rng.random_range(-noise..=noise),
                mos: q,
                sigma: estimate_sigma(q, DEFAULT_PHI),
                sigma_source: SigmaSource::BetaEstimated,
            }
        })
        .collect();
    Dataset::from_normalized(samples, (0.0, 100.0)).expect("valid synthetic data")
}
