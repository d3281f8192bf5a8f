//! Sampling ablation: GMC_g across sampling schemes, query counts and seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pipeline::{compute_gmc_with_density, GmcConfig};
use crate::robustness::mean_std;
use crate::sampler::SamplingScheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub scheme: SamplingScheme,
    pub k: usize,
    pub seed: u64,
    pub gmc_g: f64,
}

/// Spread of GMC_g over seeds for one (scheme, K) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub scheme: SamplingScheme,
    pub k: usize,
    pub seeds: usize,
    pub mean_gmc_g: f64,
    pub std_gmc_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
    pub summary: Vec<AblationSummary>,
}

impl AblationTable {
    pub fn summary_for(&self, scheme: SamplingScheme, k: usize) -> Option<&AblationSummary> {
        self.summary.iter().find(|s| s.scheme == scheme && s.k == k)
    }
}

/// Recomputes GMC_g for every (scheme, K, seed) combination, with the density
/// fitted once. Rows come out in scheme, K, seed order regardless of scheduling.
pub fn run_ablation_sampling(
    ds: &Dataset,
    config: &GmcConfig,
    schemes: &[SamplingScheme],
    k_values: &[usize],
    seeds: &[u64],
) -> Result<AblationTable> {
    if k_values.is_empty() || schemes.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "ablation needs at least one scheme, K value and seed".into(),
        ));
    }
    let dm = config.fit_density(ds)?;
    let cells: Vec<(SamplingScheme, usize, u64)> = schemes
        .iter()
        .flat_map(|&scheme| {
            k_values
                .iter()
                .flat_map(move |&k| seeds.iter().map(move |&seed| (scheme, k, seed)))
        })
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(scheme, k, seed)| {
            let cfg = GmcConfig {
                scheme,
                k,
                seed,
                ..config.clone()
            };
            let out = compute_gmc_with_density(ds, &dm, &cfg)?;
            Ok(AblationRow {
                scheme,
                k,
                seed,
                gmc_g: out.report.gmc_g,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary = rows
        .chunks(seeds.len())
        .map(|chunk| {
            let values: Vec<f64> = chunk.iter().map(|r| r.gmc_g).collect();
            let (mean_gmc_g, std_gmc_g) = mean_std(&values);
            AblationSummary {
                scheme: chunk[0].scheme,
                k: chunk[0].k,
                seeds: chunk.len(),
                mean_gmc_g,
                std_gmc_g,
            }
        })
        .collect();
    Ok(AblationTable { rows, summary })
}
