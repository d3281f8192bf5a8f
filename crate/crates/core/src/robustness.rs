//! Distribution-shift robustness protocol.
//!
//! Imbalanced subsets are drawn with selection probability proportional to a
//! Gaussian mixture over MOS. Each subset gets its own density model, and SRCC and
//! GMC_g are recomputed per model so their spread across subsets can be compared.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gcc::{classical_correlation, PairMode};
use crate::pipeline::{compute_gmc_with_density, GmcConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureMode {
    pub center: f64,
    pub width: f64,
    pub weight: f64,
}

impl MixtureMode {
    pub fn new(center: f64, width: f64, weight: f64) -> Self {
        Self {
            center,
            width,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePlan {
    #[serde(default)]
    pub label: String,
    pub modes: Vec<MixtureMode>,
    pub subset_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub replacement: bool,
}

impl ResamplePlan {
    pub fn validate(&self, available: usize) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::Config(
                "resample plan needs at least one mixture mode".into(),
            ));
        }
        for m in &self.modes {
            if !(m.width > 0.0) || !(m.weight >= 0.0) || !m.center.is_finite() {
                return Err(Error::Config(format!("invalid mixture mode {m:?}")));
            }
        }
        let total: f64 = self.modes.iter().map(|m| m.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        if self.subset_size < 3 {
            return Err(Error::FewerThanThreeSamples(self.subset_size));
        }
        if !self.replacement && self.subset_size > available {
            return Err(Error::SubsetTooLarge {
                requested: self.subset_size,
                available,
            });
        }
        Ok(())
    }

    /// Unnormalized selection probability of a sample with MOS `q`.
    pub fn selection_weight(&self, q: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let d = q - m.center;
                m.weight * (-(d * d) / (2.0 * m.width * m.width)).exp()
            })
            .sum()
    }
}

/// Default subset size: `min(1000, n / 2)`.
pub fn default_subset_size(n: usize) -> usize {
    (n / 2).min(1000)
}

/// Three unimodal, three bimodal and three trimodal plans.
pub fn default_plans(subset_size: usize, seed: u64) -> Vec<ResamplePlan> {
    let third = 1.0 / 3.0;
    let specs: [(&str, Vec<MixtureMode>); 9] = [
        ("unimodal-30", vec![MixtureMode::new(30.0, 10.0, 1.0)]),
        ("unimodal-50", vec![MixtureMode::new(50.0, 10.0, 1.0)]),
        ("unimodal-70", vec![MixtureMode::new(70.0, 10.0, 1.0)]),
        (
            "bimodal-25-75",
            vec![MixtureMode::new(25.0, 8.0, 0.5), MixtureMode::new(75.0, 8.0, 0.5)],
        ),
        (
            "bimodal-20-60",
            vec![MixtureMode::new(20.0, 8.0, 0.5), MixtureMode::new(60.0, 8.0, 0.5)],
        ),
        (
            "bimodal-40-80",
            vec![MixtureMode::new(40.0, 8.0, 0.5), MixtureMode::new(80.0, 8.0, 0.5)],
        ),
        ("trimodal-even", trimodal([third, third, third])),
        ("trimodal-low", trimodal([0.5, 0.25, 0.25])),
        ("trimodal-high", trimodal([0.25, 0.25, 0.5])),
    ];
    specs
        .into_iter()
        .enumerate()
        .map(|(i, (label, modes))| ResamplePlan {
            label: label.into(),
            modes,
            subset_size,
            seed: seed.wrapping_add(i as u64),
            replacement: false,
        })
        .collect()
}

fn trimodal(weights: [f64; 3]) -> Vec<MixtureMode> {
    [20.0, 50.0, 80.0]
        .iter()
        .zip(weights)
        .map(|(&c, w)| MixtureMode::new(c, 7.0, w))
        .collect()
}

/// Indices of the drawn samples, ascending (without replacement) or in draw order.
pub fn draw_indices(ds: &Dataset, plan: &ResamplePlan) -> Result<Vec<usize>> {
    plan.validate(ds.len())?;
    let weights: Vec<f64> = ds
        .samples()
        .iter()
        .map(|s| plan.selection_weight(s.mos))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    if plan.replacement {
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Config(format!("resample weights unusable: {e}")))?;
        return Ok((0..plan.subset_size).map(|_| dist.sample(&mut rng)).collect());
    }
    // Weighted sampling without replacement (Efraimidis–Spirakis): keep the
    // largest ln(u) / w.
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.sample(rand::distr::Open01);
            let key = if w > 0.0 { u.ln() / w } else { f64::NEG_INFINITY };
            (key, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = keyed[..plan.subset_size].iter().map(|&(_, i)| i).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

pub fn draw_subset(ds: &Dataset, plan: &ResamplePlan) -> Result<Dataset> {
    ds.subset(&draw_indices(ds, plan)?)
}

/// One model's predictions over the rows of the shared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub name: String,
    pub pred: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub srcc: Option<f64>,
    pub gmc_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub label: String,
    pub size: usize,
    pub mean_mos: f64,
    pub density_fingerprint: String,
    /// One entry per model, in input order.
    pub scores: Vec<SubsetScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub model: String,
    pub mean_srcc: f64,
    pub std_srcc: f64,
    pub mean_gmc_g: f64,
    pub std_gmc_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub models: Vec<String>,
    pub per_subset: Vec<SubsetRow>,
    pub dispersion: Vec<Dispersion>,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || values.iter().all(|&v| v == values[0]) {
        return (if values.len() < 2 { mean } else { values[0] }, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Evaluates every model on every resampled subset.
///
/// `ds` supplies the MOS and σ columns; each model's `pred` must align with its rows.
pub fn run_protocol(
    ds: &Dataset,
    models: &[ModelScores],
    plans: &[ResamplePlan],
    config: &GmcConfig,
) -> Result<RobustnessReport> {
    if plans.is_empty() {
        return Err(Error::Config(
            "robustness protocol needs at least one plan".into(),
        ));
    }
    if models.is_empty() {
        return Err(Error::Config(
            "robustness protocol needs at least one model".into(),
        ));
    }
    for m in models {
        if m.pred.len() != ds.len() {
            return Err(Error::LengthMismatch {
                left: ds.len(),
                right: m.pred.len(),
            });
        }
    }

    let per_subset = plans
        .par_iter()
        .map(|plan| -> Result<SubsetRow> {
            let indices = draw_indices(ds, plan)?;
            let base = ds.subset(&indices)?;
            // The regulator must see the shifted distribution, not the full one.
            let dm = config.fit_density(&base)?;
            let scores = models
                .iter()
                .map(|m| -> Result<SubsetScore> {
                    let preds: Vec<f64> = indices.iter().map(|&i| m.pred[i]).collect();
                    let sub = base.with_preds(&preds)?;
                    let out = compute_gmc_with_density(&sub, &dm, config)?;
                    Ok(SubsetScore {
                        srcc: classical_correlation(&sub, PairMode::SrccRankDiff),
                        gmc_g: out.report.gmc_g,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SubsetRow {
                label: plan.label.clone(),
                size: base.len(),
                mean_mos: base.mos().iter().sum::<f64>() / base.len() as f64,
                density_fingerprint: dm.fingerprint(),
                scores,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dispersion = models
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let srcc: Vec<f64> = per_subset.iter().filter_map(|r| r.scores[k].srcc).collect();
            let gmc: Vec<f64> = per_subset.iter().map(|r| r.scores[k].gmc_g).collect();
            let (mean_srcc, std_srcc) = mean_std(&srcc);
            let (mean_gmc_g, std_gmc_g) = mean_std(&gmc);
            Dispersion {
                model: m.name.clone(),
                mean_srcc,
                std_srcc,
                mean_gmc_g,
                std_gmc_g,
            }
        })
        .collect();

    Ok(RobustnessReport {
        models: models.iter().map(|m| m.name.clone()).collect(),
        per_subset,
        dispersion,
    })
}
