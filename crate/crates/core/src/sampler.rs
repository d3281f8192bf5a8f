//! Query-point generation over the (MOS, |ΔMOS|) rectangle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcc::Correlation;

pub const DEFAULT_K: usize = 100;

/// One `(Q^s, Q^d)` query and, once evaluated, its weighted correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryPoint {
    pub qs: f64,
    pub qd: f64,
    pub gamma: Correlation,
}

impl QueryPoint {
    pub fn new(qs: f64, qd: f64) -> Self {
        Self { qs, qd, gamma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingScheme {
    Lhs,
    Random,
}

impl std::str::FromStr for SamplingScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lhs" => Ok(SamplingScheme::Lhs),
            "random" => Ok(SamplingScheme::Random),
            other => Err(format!("unknown sampler `{other}` (expected lhs or random)")),
        }
    }
}

impl std::fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplingScheme::Lhs => "lhs",
            SamplingScheme::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub k: usize,
    pub qs_range: (f64, f64),
    pub qd_range: (f64, f64),
    pub scheme: SamplingScheme,
    pub seed: u64,
    /// Reuse the same within-stratum offset `u_k` on both axes.
    pub shared_u: bool,
}

impl SamplePlan {
    pub fn new(
        k: usize,
        qs_range: (f64, f64),
        qd_range: (f64, f64),
        scheme: SamplingScheme,
        seed: u64,
    ) -> Self {
        Self {
            k,
            qs_range,
            qd_range,
            scheme,
            seed,
            shared_u: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("number of query points must be positive".into()));
        }
        for &(min, max) in &[self.qs_range, self.qd_range] {
            if !(max > min) || !min.is_finite() || !max.is_finite() {
                return Err(Error::InvalidRange { min, max });
            }
        }
        Ok(())
    }
}

/// Draws `plan.k` query points; bit-exact for a given plan and seed.
pub fn sample_points(plan: &SamplePlan) -> Result<Vec<QueryPoint>> {
    plan.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let k = plan.k;
    match plan.scheme {
        SamplingScheme::Lhs => {
            let mut perm_x: Vec<usize> = (1..=k).collect();
            let mut perm_y: Vec<usize> = (1..=k).collect();
            perm_x.shuffle(&mut rng);
            perm_y.shuffle(&mut rng);
            let u_s: Vec<f64> = (0..k).map(|_| open_unit(&mut rng)).collect();
            let u_d: Vec<f64> = if plan.shared_u {
                u_s.clone()
            } else {
                (0..k).map(|_| open_unit(&mut rng)).collect()
            };
            Ok(lhs_from_parts(
                &perm_x,
                &perm_y,
                &u_s,
                &u_d,
                plan.qs_range,
                plan.qd_range,
            ))
        }
        SamplingScheme::Random => Ok((0..k)
            .map(|_| {
                let qs = rng.random_range(plan.qs_range.0..plan.qs_range.1);
                let qd = rng.random_range(plan.qd_range.0..plan.qd_range.1);
                QueryPoint::new(qs, qd)
            })
            .collect()),
    }
}

fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand::distr::Open01)
}

/// Latin hypercube coordinates from explicit permutations (values in `1..=K`) and
/// within-stratum offsets in `(0, 1)`:
/// `Q_k = (π(k) − u_k) / K · (max − min) + min`.
pub fn lhs_from_parts(
    perm_x: &[usize],
    perm_y: &[usize],
    u_s: &[f64],
    u_d: &[f64],
    qs_range: (f64, f64),
    qd_range: (f64, f64),
) -> Vec<QueryPoint> {
    let k = perm_x.len() as f64;
    let place = |stratum: usize, u: f64, (min, max): (f64, f64)| (stratum as f64 - u) / k * (max - min) + min;
    perm_x
        .iter()
        .zip(perm_y)
        .zip(u_s.iter().zip(u_d))
        .map(|((&px, &py), (&us, &ud))| QueryPoint::new(place(px, us, qs_range), place(py, ud, qd_range)))
        .collect()
}

/// Zero-based stratum of `x` when `[min, max]` is cut into `k` equal intervals.
pub fn stratum_of(x: f64, (min, max): (f64, f64), k: usize) -> usize {
    let idx = ((x - min) / (max - min) * k as f64).floor();
    if idx <= 0.0 {
        0
    } else {
        (idx as usize).min(k - 1)
    }
}

/// True when each of the `k` strata on both axes holds exactly one point.
pub fn is_stratified(points: &[QueryPoint], qs_range: (f64, f64), qd_range: (f64, f64)) -> bool {
    let k = points.len();
    let mut seen_s = vec![0usize; k];
    let mut seen_d = vec![0usize; k];
    for p in points {
        seen_s[stratum_of(p.qs, qs_range, k)] += 1;
        seen_d[stratum_of(p.qd, qd_range, k)] += 1;
    }
    seen_s.iter().chain(&seen_d).all(|&c| c == 1)
}
