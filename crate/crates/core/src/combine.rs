//! Linear combination of two metrics with possibly opposite polarity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

impl std::str::FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "higher" | "higher_better" | "higher-better" => Ok(Polarity::HigherBetter),
            "lower" | "lower_better" | "lower-better" => Ok(Polarity::LowerBetter),
            other => Err(format!("unknown polarity `{other}` (expected higher or lower)")),
        }
    }
}

/// Min-max normalizes to `[0, 1]` and flips lower-is-better columns, so that
/// larger always means better. A constant column maps to all zeros before flipping.
pub fn oriented(values: &[f64], polarity: Polarity) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            let x = if span > 0.0 { (v - lo) / span } else { 0.0 };
            match polarity {
                Polarity::HigherBetter => x,
                Polarity::LowerBetter => 1.0 - x,
            }
        })
        .collect()
}

/// `oriented(a) + oriented(b)`, e.g. `(1 − LPIPS) + MS-SSIM`.
pub fn combine_scores(a: &[f64], polarity_a: Polarity, b: &[f64], polarity_b: Polarity) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(oriented(a, polarity_a)
        .into_iter()
        .zip(oriented(b, polarity_b))
        .map(|(x, y)| x + y)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::mid_ranks;

    #[test]
    fn doubling_preserves_order() {
        let a = [0.3, 0.9, 0.1, 0.5, 0.7];
        let c = combine_scores(&a, Polarity::HigherBetter, &a, Polarity::HigherBetter).unwrap();
        assert_eq!(mid_ranks(&c), mid_ranks(&a));
    }

    #[test]
    fn opposite_affine_copy_cancels() {
        let a = [0.3, 0.9, 0.1, 0.5, 0.7];
        let b: Vec<f64> = a.iter().map(|x| 4.0 * x - 2.0).collect();
        let c = combine_scores(&a, Polarity::HigherBetter, &b, Polarity::LowerBetter).unwrap();
        assert!(c.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn lower_better_is_reflected() {
        let lpips = [0.1, 0.4, 0.2];
        let ssim = [0.95, 0.7, 0.9];
        let c = combine_scores(&lpips, Polarity::LowerBetter, &ssim, Polarity::HigherBetter).unwrap();
        assert_eq!(mid_ranks(&c), vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn length_mismatch() {
        let err = combine_scores(
            &[0.0; 10],
            Polarity::HigherBetter,
            &[0.0; 9],
            Polarity::HigherBetter,
        )
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { left: 10, right: 9 }));
    }
}
