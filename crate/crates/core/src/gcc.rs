//! Generalized correlation coefficient over antisymmetric pair functions.
//!
//! Every coefficient here has the form
//!
//! ```text
//!            Σ w_ij a_ij b_ij
//! Γ = ─────────────────────────────────
//!     sqrt(Σ w_ij a_ij²) sqrt(Σ w_ij b_ij²)
//! ```
//!
//! over ordered pairs `i ≠ j`. With `w ≡ 1` it reduces to Pearson (`a = p_i − p_j`),
//! Spearman (rank differences) or Kendall (`a = sgn(p_i − p_j)`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::summation::{compensated_sum, NeumaierSum};

/// A correlation value, or `None` when the weighted support is degenerate.
pub type Correlation = Option<f64>;

/// Denominator sums below this make the coefficient undefined.
pub const DEGENERATE_SUM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairMode {
    #[serde(rename = "plcc")]
    PlccDiff,
    #[serde(rename = "srcc")]
    SrccRankDiff,
    #[serde(rename = "krcc")]
    KrccSign,
}

impl PairMode {
    pub fn name(self) -> &'static str {
        match self {
            PairMode::PlccDiff => "plcc",
            PairMode::SrccRankDiff => "srcc",
            PairMode::KrccSign => "krcc",
        }
    }

    /// True when the coefficient depends on predictions only through their order.
    pub fn is_rank_based(self) -> bool {
        !matches!(self, PairMode::PlccDiff)
    }
}

impl std::str::FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "plcc" => Ok(PairMode::PlccDiff),
            "srcc" => Ok(PairMode::SrccRankDiff),
            "krcc" => Ok(PairMode::KrccSign),
            other => Err(format!("unknown metric `{other}` (expected plcc, srcc or krcc)")),
        }
    }
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// `sgn(x − y)` with `sgn(0) = 0`.
#[inline]
pub fn sgn_diff(x: f64, y: f64) -> f64 {
    sgn(x - y)
}

#[inline]
fn sgn(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Per-sample values from which the pair functions `a_ij`, `b_ij` are formed.
#[derive(Debug, Clone)]
pub struct PairTerms {
    pred: Vec<f64>,
    mos: Vec<f64>,
    sign: bool,
}

impl PairTerms {
    pub fn new(ds: &Dataset, mode: PairMode) -> Self {
        let (pred, mos) = match mode {
            PairMode::PlccDiff | PairMode::KrccSign => (ds.preds(), ds.mos()),
            PairMode::SrccRankDiff => (ds.pred_ranks().to_vec(), ds.mos_ranks().to_vec()),
        };
        Self {
            pred,
            mos,
            sign: mode == PairMode::KrccSign,
        }
    }

    pub fn len(&self) -> usize {
        self.pred.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pred.is_empty()
    }

    /// True for the sign pair function, false for plain differences.
    pub fn is_sign(&self) -> bool {
        self.sign
    }

    /// The per-sample prediction-side and MOS-side values.
    pub fn columns(&self) -> (&[f64], &[f64]) {
        (&self.pred, &self.mos)
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        let d = self.pred[i] - self.pred[j];
        if self.sign {
            sgn(d)
        } else {
            d
        }
    }

    #[inline]
    pub fn b(&self, i: usize, j: usize) -> f64 {
        let d = self.mos[i] - self.mos[j];
        if self.sign {
            sgn(d)
        } else {
            d
        }
    }
}

/// Running numerator and denominator sums of one coefficient.
#[derive(Debug, Clone, Copy, Default)]
pub struct GccSums {
    pub ab: NeumaierSum,
    pub aa: NeumaierSum,
    pub bb: NeumaierSum,
}

impl GccSums {
    #[inline]
    pub fn add(&mut self, w: f64, a: f64, b: f64) {
        let wa = w * a;
        self.ab.add(wa * b);
        self.aa.add(wa * a);
        self.bb.add(w * b * b);
    }

    pub fn merge(&mut self, other: &GccSums) {
        self.ab.merge(&other.ab);
        self.aa.merge(&other.aa);
        self.bb.merge(&other.bb);
    }

    pub fn finish(&self) -> Correlation {
        let (aa, bb) = (self.aa.value(), self.bb.value());
        if !(aa >= DEGENERATE_SUM && bb >= DEGENERATE_SUM) {
            return None;
        }
        let r = self.ab.value() / (aa.sqrt() * bb.sqrt());
        r.is_finite().then(|| r.clamp(-1.0, 1.0))
    }
}

/// Weighted coefficient over all ordered pairs `i ≠ j`.
///
/// `weight(i, j)` is evaluated lazily and must be symmetric and nonnegative. Rows
/// are reduced in index order, so the result does not depend on the thread count.
pub fn weighted_gcc<W>(ds: &Dataset, mode: PairMode, weight: W) -> Correlation
where
    W: Fn(usize, usize) -> f64 + Sync,
{
    weighted_gcc_terms(&PairTerms::new(ds, mode), weight, false)
}

pub(crate) fn weighted_gcc_terms<W>(terms: &PairTerms, weight: W, include_diagonal: bool) -> Correlation
where
    W: Fn(usize, usize) -> f64 + Sync,
{
    let n = terms.len();
    let rows: Vec<GccSums> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = GccSums::default();
            for j in 0..n {
                if i == j && !include_diagonal {
                    continue;
                }
                let w = weight(i, j);
                if w != 0.0 {
                    row.add(w, terms.a(i, j), terms.b(i, j));
                }
            }
            row
        })
        .collect();
    let mut total = GccSums::default();
    for row in &rows {
        total.merge(row);
    }
    total.finish()
}

/// Unweighted PLCC, SRCC (Pearson on mid-ranks) or KRCC (τ-b, which is τ-a without
/// ties). `None` when either column has zero variance.
pub fn classical_correlation(ds: &Dataset, mode: PairMode) -> Correlation {
    match mode {
        PairMode::PlccDiff => pearson(&ds.preds(), &ds.mos()),
        PairMode::SrccRankDiff => pearson(ds.pred_ranks(), ds.mos_ranks()),
        PairMode::KrccSign => kendall(&ds.preds(), &ds.mos()),
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len() as f64;
    let mx = compensated_sum(x.iter().copied()) / n;
    let my = compensated_sum(y.iter().copied()) / n;
    let mut sums = GccSums::default();
    for (&xi, &yi) in x.iter().zip(y) {
        sums.add(1.0, xi - mx, yi - my);
    }
    sums.finish()
}

fn kendall(x: &[f64], y: &[f64]) -> Correlation {
    let n = x.len();
    let mut sums = GccSums::default();
    for i in 0..n {
        for j in (i + 1)..n {
            sums.add(1.0, sgn(x[i] - x[j]), sgn(y[i] - y[j]));
        }
    }
    sums.finish()
}
