//! End-to-end GMC computation for one model's scores.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gcc::PairMode;
use crate::modulator::PdConvention;
use crate::regulator::{DensityMode, DensityModel, DEFAULT_BANDWIDTH, DEFAULT_BINS, DEFAULT_FLOOR};
use crate::sampler::{sample_points, QueryPoint, SamplePlan, SamplingScheme, DEFAULT_K};
use crate::surface::{
    fit_surface, summarize, Baselines, CorrelationSurface, GmcReport, QueryEvaluator, DEFAULT_GRID,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmcConfig {
    pub metric_mode: PairMode,
    pub k: usize,
    pub bins: usize,
    pub grid: usize,
    pub density_bandwidth: f64,
    pub density_floor: f64,
    /// `false` selects raw bin frequencies for the density.
    pub kernel_smoothing: bool,
    /// Forces a density mode instead of choosing from σ availability.
    pub density_mode: Option<DensityMode>,
    pub scheme: SamplingScheme,
    pub seed: u64,
    pub shared_u: bool,
    pub qs_range: Option<(f64, f64)>,
    pub qd_range: Option<(f64, f64)>,
    pub pd_convention: PdConvention,
    pub weight_cutoff: Option<f64>,
    pub fit_bandwidths: Option<(f64, f64)>,
}

impl Default for GmcConfig {
    fn default() -> Self {
        Self {
            metric_mode: PairMode::SrccRankDiff,
            k: DEFAULT_K,
            bins: DEFAULT_BINS,
            grid: DEFAULT_GRID,
            density_bandwidth: DEFAULT_BANDWIDTH,
            density_floor: DEFAULT_FLOOR,
            kernel_smoothing: true,
            density_mode: None,
            scheme: SamplingScheme::Lhs,
            seed: 0,
            shared_u: true,
            qs_range: None,
            qd_range: None,
            pd_convention: PdConvention::Printed,
            weight_cutoff: None,
            fit_bandwidths: None,
        }
    }
}

impl GmcConfig {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn density_mode_for(&self, ds: &Dataset) -> DensityMode {
        self.density_mode
            .unwrap_or_else(|| DensityMode::auto(ds, self.kernel_smoothing))
    }

    pub fn fit_density(&self, ds: &Dataset) -> Result<DensityModel> {
        DensityModel::fit(
            ds,
            self.density_mode_for(ds),
            self.bins,
            self.density_bandwidth,
            self.density_floor,
        )
    }

    /// Query ranges: overrides if set, else the empirical MOS extent and
    /// `(0, max |q_i − q_j|)`.
    pub fn ranges_for(&self, ds: &Dataset) -> Result<((f64, f64), (f64, f64))> {
        let (lo, hi) = ds.mos_extent();
        let qs = self.qs_range.unwrap_or((lo, hi));
        let qd = self.qd_range.unwrap_or((0.0, hi - lo));
        for &(min, max) in &[qs, qd] {
            if !(max > min) {
                return Err(Error::InvalidRange { min, max });
            }
        }
        if qd.0 < 0.0 {
            return Err(Error::Config(format!(
                "|ΔMOS| range must be nonnegative, got {qd:?}"
            )));
        }
        Ok((qs, qd))
    }

    pub fn sample_plan(&self, qs: (f64, f64), qd: (f64, f64)) -> SamplePlan {
        SamplePlan {
            shared_u: self.shared_u,
            ..SamplePlan::new(self.k, qs, qd, self.scheme, self.seed)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmcOutcome {
    pub report: GmcReport,
    pub surface: CorrelationSurface,
    pub queries: Vec<QueryPoint>,
    pub density_fingerprint: String,
}

/// Fits the density on `ds` and runs the full pipeline.
pub fn compute_gmc(ds: &Dataset, config: &GmcConfig) -> Result<GmcOutcome> {
    let dm = config.fit_density(ds)?;
    compute_gmc_with_density(ds, &dm, config)
}

/// Runs the pipeline with a density fitted elsewhere (shared by models scored on
/// the same images).
pub fn compute_gmc_with_density(ds: &Dataset, dm: &DensityModel, config: &GmcConfig) -> Result<GmcOutcome> {
    let (qs_range, qd_range) = config.ranges_for(ds)?;
    let plan = config.sample_plan(qs_range, qd_range);
    let points = sample_points(&plan)?;
    let evaluator = QueryEvaluator::new(ds, dm, config.metric_mode)
        .with_convention(config.pd_convention)
        .with_cutoff(config.weight_cutoff);
    let queries = evaluator.evaluate_all(&points);
    let surface = fit_surface(&queries, qs_range, qd_range, config.grid, config.fit_bandwidths)?;
    let (gmc_g, gmc_s, gmc_d) = summarize(&surface)?;
    let report = GmcReport {
        metric_mode: config.metric_mode,
        gmc_g,
        gmc_s,
        gmc_d,
        baselines: Baselines::compute(ds),
        n_samples: ds.len(),
        k_requested: config.k,
        k_used: surface.source_points.len(),
        excluded_count: surface.excluded_count,
        qs_range,
        qd_range,
        density_mode: dm.mode(),
        seed: config.seed,
        config_digest: config.digest(),
    };
    Ok(GmcOutcome {
        report,
        surface,
        queries,
        density_fingerprint: dm.fingerprint(),
    })
}
