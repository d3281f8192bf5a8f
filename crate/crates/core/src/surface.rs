//! Query evaluation, correlation-surface fitting and region integration.

use log::warn;
use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fastexp;
use crate::gcc::{sgn_diff, Correlation, GccSums, PairMode, PairTerms};
use crate::modulator::PdConvention;
use crate::regulator::DensityModel;
use crate::sampler::QueryPoint;

pub const DEFAULT_GRID: usize = 50;
/// Defined query points needed before a surface is fitted.
pub const MIN_FIT_POINTS: usize = 6;
/// Local design matrices worse conditioned than this fall back to a local mean.
pub const MAX_CONDITION: f64 = 1e8;

/// Per-dataset state for evaluating Γ at many queries.
///
/// The pair weight `p_s · p_d · p_t` factors into per-sample terms for `p_s` and
/// `p_t`, leaving one exponential per pair for `p_d`. Each unordered pair is
/// visited once and counted twice, which matches the ordered-pair sums exactly up
/// to rounding.
#[derive(Debug, Clone)]
pub struct QueryEvaluator {
    terms: PairTerms,
    mos: Vec<f64>,
    var: Vec<f64>,
    inv_density: Vec<f64>,
    convention: PdConvention,
    cutoff: Option<f64>,
}

impl QueryEvaluator {
    pub fn new(ds: &Dataset, dm: &DensityModel, mode: PairMode) -> Self {
        let mos = ds.mos();
        Self {
            terms: PairTerms::new(ds, mode),
            inv_density: mos.iter().map(|&q| 1.0 / dm.density(q)).collect(),
            var: ds.samples().iter().map(|s| s.sigma * s.sigma).collect(),
            mos,
            convention: PdConvention::Printed,
            cutoff: None,
        }
    }

    pub fn with_convention(mut self, convention: PdConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Treat pair weights below `cutoff` as zero.
    pub fn with_cutoff(mut self, cutoff: Option<f64>) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn gamma(&self, qs: f64, qd: f64) -> Correlation {
        let local: Vec<f64> = self
            .mos
            .iter()
            .zip(&self.var)
            .zip(&self.inv_density)
            .map(|((&q, &v), &inv_d)| {
                let d = qs - q;
                (-(d * d) / (2.0 * v)).exp() * inv_d
            })
            .collect();
        self.dispatch(&local, qd)
    }

    fn dispatch(&self, local: &[f64], qd: f64) -> Correlation {
        #[cfg(target_arch = "x86_64")]
        {
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: the CPU supports the enabled features.
                return unsafe { self.accumulate_avx2(local, qd) };
            }
        }
        self.accumulate_generic(local, qd)
    }

    // Same code compiled with wider vectors. Rust never contracts mul/add into
    // fma, so both paths round identically.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2")]
    unsafe fn accumulate_avx2(&self, local: &[f64], qd: f64) -> Correlation {
        self.accumulate_generic(local, qd)
    }

    #[inline(always)]
    fn accumulate_generic(&self, local: &[f64], qd: f64) -> Correlation {
        if self.terms.is_sign() {
            self.accumulate(local, qd, sgn_diff)
        } else {
            self.accumulate(local, qd, |x, y| x - y)
        }
    }

    /// Row-blocked reduction: each row is summed directly, rows are merged with
    /// compensation. Within a row the `p_d` exponents, their exponentials and the
    /// weighted sums are separate passes so each loop vectorizes.
    #[inline(always)]
    fn accumulate<F: Fn(f64, f64) -> f64>(&self, local: &[f64], qd: f64, pair: F) -> Correlation {
        let n = self.mos.len();
        let factor = self.convention.factor();
        let cutoff = self.cutoff.unwrap_or(0.0);
        let (pred, mos_terms) = self.terms.columns();
        let mut sums = GccSums::default();
        let mut pd = vec![0.0f64; n];
        for i in 0..n {
            let fi = local[i];
            if fi == 0.0 {
                continue;
            }
            let (qi, vi, pi, mi) = (self.mos[i], self.var[i], pred[i], mos_terms[i]);
            let lo = i + 1;
            let len = n - lo;
            let (q, v, f) = (&self.mos[lo..n], &self.var[lo..n], &local[lo..n]);
            let (p, m) = (&pred[lo..n], &mos_terms[lo..n]);
            let pd = &mut pd[..len];
            for ((e, &qj), &vj) in pd.iter_mut().zip(q).zip(v) {
                let gap = qd - (qi - qj).abs();
                *e = -(gap * gap) / (factor * (vi + vj));
            }
            fastexp::exp_in_place(pd);
            // [ab, aa, bb] contribution of the pair (i, lo + t)
            let term = |t: usize| -> [f64; 3] {
                let w = fi * f[t] * pd[t];
                let w = if w < cutoff { 0.0 } else { w };
                let a = pair(pi, p[t]);
                let b = pair(mi, m[t]);
                let wa = w * a;
                [wa * b, wa * a, w * b * b]
            };
            // independent lanes so the reduction can be vectorized
            const LANES: usize = 4;
            let mut lanes = [[0.0f64; LANES]; 3];
            let full = len - len % LANES;
            for base in (0..full).step_by(LANES) {
                for l in 0..LANES {
                    let [x, y, z] = term(base + l);
                    lanes[0][l] += x;
                    lanes[1][l] += y;
                    lanes[2][l] += z;
                }
            }
            let [mut ab, mut aa, mut bb] = lanes.map(|acc| acc.iter().sum::<f64>());
            for t in full..len {
                let [x, y, z] = term(t);
                ab += x;
                aa += y;
                bb += z;
            }
            // each unordered pair stands for (i, j) and (j, i)
            sums.ab.add(2.0 * ab);
            sums.aa.add(2.0 * aa);
            sums.bb.add(2.0 * bb);
        }
        sums.finish()
    }

    pub fn evaluate(&self, pt: QueryPoint) -> QueryPoint {
        QueryPoint {
            gamma: self.gamma(pt.qs, pt.qd),
            ..pt
        }
    }

    /// Evaluates every point, in parallel, preserving order.
    pub fn evaluate_all(&self, points: &[QueryPoint]) -> Vec<QueryPoint> {
        points.par_iter().map(|&p| self.evaluate(p)).collect()
    }
}

/// Γ at one query with the default weights.
pub fn evaluate_query(ds: &Dataset, dm: &DensityModel, pt: QueryPoint, mode: PairMode) -> QueryPoint {
    QueryEvaluator::new(ds, dm, mode).evaluate(pt)
}

/// Axis-aligned rectangle in the (MOS, |ΔMOS|) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub qs: (f64, f64),
    pub qd: (f64, f64),
}

impl Rect {
    pub fn new(qs: (f64, f64), qd: (f64, f64)) -> Self {
        Self { qs, qd }
    }

    pub fn area(&self) -> f64 {
        (self.qs.1 - self.qs.0) * (self.qd.1 - self.qd.0)
    }

    pub fn centroid(&self) -> (f64, f64) {
        ((self.qs.0 + self.qs.1) / 2.0, (self.qd.0 + self.qd.1) / 2.0)
    }
}

/// Equal-width thirds of each axis: quality levels and difference levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSet {
    pub lq: Rect,
    pub mq: Rect,
    pub hq: Rect,
    pub ld: Rect,
    pub md: Rect,
    pub hd: Rect,
}

impl RegionSet {
    pub fn quality(&self) -> [Rect; 3] {
        [self.lq, self.mq, self.hq]
    }

    pub fn difference(&self) -> [Rect; 3] {
        [self.ld, self.md, self.hd]
    }
}

fn thirds((lo, hi): (f64, f64)) -> [(f64, f64); 3] {
    let span = hi - lo;
    let a = lo + span / 3.0;
    let b = lo + span * 2.0 / 3.0;
    [(lo, a), (a, b), (b, hi)]
}

pub fn region_partition(qs_range: (f64, f64), qd_range: (f64, f64)) -> RegionSet {
    let [lq, mq, hq] = thirds(qs_range).map(|r| Rect::new(r, qd_range));
    let [ld, md, hd] = thirds(qd_range).map(|r| Rect::new(qs_range, r));
    RegionSet {
        lq,
        mq,
        hq,
        ld,
        md,
        hd,
    }
}

/// A fitted surface sampled at the centres of a `G × G` grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSurface {
    pub qs_range: (f64, f64),
    pub qd_range: (f64, f64),
    pub qs_axis: Vec<f64>,
    pub qd_axis: Vec<f64>,
    /// Row-major: `grid[s * G + d]` sits at `(qs_axis[s], qd_axis[d])`.
    pub grid: Vec<f64>,
    pub fit_bandwidths: (f64, f64),
    pub source_points: Vec<(f64, f64, f64)>,
    pub excluded_count: usize,
}

impl CorrelationSurface {
    pub fn size(&self) -> usize {
        self.qs_axis.len()
    }

    pub fn value(&self, s: usize, d: usize) -> f64 {
        self.grid[s * self.size() + d]
    }

    pub fn domain(&self) -> Rect {
        Rect::new(self.qs_range, self.qd_range)
    }

    /// `(qs, qd, value)` for every grid cell, MOS-major.
    pub fn long_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let g = self.size();
        (0..g * g).map(move |idx| (self.qs_axis[idx / g], self.qd_axis[idx % g], self.grid[idx]))
    }
}

fn cell_centres((lo, hi): (f64, f64), g: usize) -> Vec<f64> {
    let step = (hi - lo) / g as f64;
    (0..g).map(|i| lo + (i as f64 + 0.5) * step).collect()
}

fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn mean_nearest_gap(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    let total: f64 = (0..m)
        .map(|i| {
            let left = if i > 0 {
                sorted[i] - sorted[i - 1]
            } else {
                f64::INFINITY
            };
            let right = if i + 1 < m {
                sorted[i + 1] - sorted[i]
            } else {
                f64::INFINITY
            };
            left.min(right)
        })
        .sum();
    total / m as f64
}

/// Normal-reference bandwidth for a 2-D product kernel (`σ̂ · K^{-1/6}`), floored at
/// 1.5 × the mean nearest-neighbour gap along the axis.
pub fn silverman_bandwidth(coords: &[f64], range: (f64, f64)) -> f64 {
    let k = coords.len() as f64;
    let rule = sample_std(coords) * k.powf(-1.0 / 6.0);
    let floor = 1.5 * mean_nearest_gap(coords);
    let h = rule.max(floor);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        (range.1 - range.0) / 10.0
    }
}

/// Local linear kernel regression of the defined Γ values onto a `grid × grid`
/// lattice over `qs_range × qd_range`.
///
/// Points with undefined Γ are dropped and counted. `bandwidths` overrides the
/// per-axis Silverman rule.
pub fn fit_surface(
    points: &[QueryPoint],
    qs_range: (f64, f64),
    qd_range: (f64, f64),
    grid: usize,
    bandwidths: Option<(f64, f64)>,
) -> Result<CorrelationSurface> {
    for &(min, max) in &[qs_range, qd_range] {
        if !(max > min) {
            return Err(Error::InvalidRange { min, max });
        }
    }
    if grid == 0 {
        return Err(Error::Config("grid size must be positive".into()));
    }
    let source: Vec<(f64, f64, f64)> = points
        .iter()
        .filter_map(|p| p.gamma.map(|g| (p.qs, p.qd, g)))
        .collect();
    let excluded = points.len() - source.len();
    if source.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_FIT_POINTS,
            got: source.len(),
        });
    }
    if excluded * 10 > points.len() {
        warn!(
            "{excluded} of {} query points have undefined correlation and were excluded",
            points.len()
        );
    }

    let (h_s, h_d) = match bandwidths {
        Some((hs, hd)) => {
            if !(hs > 0.0 && hd > 0.0) {
                return Err(Error::Config(format!(
                    "bandwidths must be positive, got ({hs}, {hd})"
                )));
            }
            (hs, hd)
        }
        None => {
            let xs: Vec<f64> = source.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = source.iter().map(|p| p.1).collect();
            (
                silverman_bandwidth(&xs, qs_range),
                silverman_bandwidth(&ys, qd_range),
            )
        }
    };

    let qs_axis = cell_centres(qs_range, grid);
    let qd_axis = cell_centres(qd_range, grid);
    let values: Vec<f64> = (0..grid * grid)
        .into_par_iter()
        .map(|idx| local_linear(&source, qs_axis[idx / grid], qd_axis[idx % grid], h_s, h_d).clamp(-1.0, 1.0))
        .collect();

    Ok(CorrelationSurface {
        qs_range,
        qd_range,
        qs_axis,
        qd_axis,
        grid: values,
        fit_bandwidths: (h_s, h_d),
        source_points: source,
        excluded_count: excluded,
    })
}

/// Intercept of the kernel-weighted affine fit centred at `(gs, gd)`.
fn local_linear(source: &[(f64, f64, f64)], gs: f64, gd: f64, h_s: f64, h_d: f64) -> f64 {
    let mut m = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    let (mut wsum, mut wgamma) = (0.0, 0.0);
    for &(s, d, gamma) in source {
        let u = (s - gs) / h_s;
        let v = (d - gd) / h_d;
        let w = (-0.5 * (u * u + v * v)).exp();
        if w == 0.0 {
            continue;
        }
        let x = Vector3::new(1.0, u, v);
        m += w * x * x.transpose();
        rhs += w * gamma * x;
        wsum += w;
        wgamma += w * gamma;
    }
    if wsum == 0.0 {
        // Every kernel weight underflowed: take the nearest point.
        let nearest = source
            .iter()
            .min_by(|a, b| {
                let da = ((a.0 - gs) / h_s).powi(2) + ((a.1 - gd) / h_d).powi(2);
                let db = ((b.0 - gs) / h_s).powi(2) + ((b.1 - gd) / h_d).powi(2);
                da.total_cmp(&db)
            })
            .expect("source is non-empty");
        return nearest.2;
    }
    let local_mean = wgamma / wsum;
    let eig = SymmetricEigen::new(m);
    let (lo, hi) = eig
        .eigenvalues
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &l| {
            (lo.min(l), hi.max(l))
        });
    if !(lo > 0.0) || hi / lo > MAX_CONDITION {
        return local_mean;
    }
    match m.cholesky() {
        Some(chol) => chol.solve(&rhs)[0],
        None => local_mean,
    }
}

fn overlap((a0, a1): (f64, f64), (b0, b1): (f64, f64)) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Area-normalized midpoint-rule integral of the surface over `region`; cells that
/// straddle the region boundary count by their overlap.
pub fn integrate(surface: &CorrelationSurface, region: &Rect) -> Result<f64> {
    let g = surface.size();
    let s_step = (surface.qs_range.1 - surface.qs_range.0) / g as f64;
    let d_step = (surface.qd_range.1 - surface.qd_range.0) / g as f64;
    let s_overlap: Vec<f64> = (0..g)
        .map(|i| {
            let lo = surface.qs_range.0 + i as f64 * s_step;
            overlap((lo, lo + s_step), region.qs)
        })
        .collect();
    let d_overlap: Vec<f64> = (0..g)
        .map(|i| {
            let lo = surface.qd_range.0 + i as f64 * d_step;
            overlap((lo, lo + d_step), region.qd)
        })
        .collect();
    let mut weighted = 0.0;
    let mut area = 0.0;
    for (s, &os) in s_overlap.iter().enumerate() {
        if os == 0.0 {
            continue;
        }
        for (d, &od) in d_overlap.iter().enumerate() {
            if od == 0.0 {
                continue;
            }
            let a = os * od;
            weighted += a * surface.value(s, d);
            area += a;
        }
    }
    if !(area > 0.0) {
        return Err(Error::EmptyRegion);
    }
    Ok((weighted / area).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityRegions {
    #[serde(rename = "LQ")]
    pub lq: f64,
    #[serde(rename = "MQ")]
    pub mq: f64,
    #[serde(rename = "HQ")]
    pub hq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferenceRegions {
    #[serde(rename = "LD")]
    pub ld: f64,
    #[serde(rename = "MD")]
    pub md: f64,
    #[serde(rename = "HD")]
    pub hd: f64,
}

/// Classical coefficients; `None` (JSON `null`) when undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    #[serde(rename = "PLCC")]
    pub plcc: Option<f64>,
    #[serde(rename = "SRCC")]
    pub srcc: Option<f64>,
    #[serde(rename = "KRCC")]
    pub krcc: Option<f64>,
}

impl Baselines {
    pub fn compute(ds: &Dataset) -> Self {
        use crate::gcc::classical_correlation as cc;
        Self {
            plcc: cc(ds, PairMode::PlccDiff),
            srcc: cc(ds, PairMode::SrccRankDiff),
            krcc: cc(ds, PairMode::KrccSign),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmcReport {
    pub metric_mode: PairMode,
    pub gmc_g: f64,
    pub gmc_s: QualityRegions,
    pub gmc_d: DifferenceRegions,
    pub baselines: Baselines,
    pub n_samples: usize,
    pub k_requested: usize,
    pub k_used: usize,
    pub excluded_count: usize,
    pub qs_range: (f64, f64),
    pub qd_range: (f64, f64),
    pub density_mode: crate::regulator::DensityMode,
    pub seed: u64,
    pub config_digest: String,
}

/// Integrates a fitted surface into the global and six regional indicators.
pub fn summarize(surface: &CorrelationSurface) -> Result<(f64, QualityRegions, DifferenceRegions)> {
    let regions = region_partition(surface.qs_range, surface.qd_range);
    let [lq, mq, hq] = regions.quality();
    let [ld, md, hd] = regions.difference();
    let gmc_g = integrate(surface, &surface.domain())?;
    Ok((
        gmc_g,
        QualityRegions {
            lq: integrate(surface, &lq)?,
            mq: integrate(surface, &mq)?,
            hq: integrate(surface, &hq)?,
        },
        DifferenceRegions {
            ld: integrate(surface, &ld)?,
            md: integrate(surface, &md)?,
            hd: integrate(surface, &hd)?,
        },
    ))
}
