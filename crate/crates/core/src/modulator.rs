//! Granularity modulator: Gaussian pair weights that localize the correlation at a
//! target MOS (`p_s`) and a target MOS difference (`p_d`).

use serde::{Deserialize, Serialize};

/// Variance used in the `p_d` exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdConvention {
    /// `σ_i² + σ_j²`.
    #[default]
    Printed,
    /// `2(σ_i² + σ_j²)`, the usual Gaussian normalization of a difference.
    Doubled,
}

impl PdConvention {
    #[inline]
    pub fn factor(self) -> f64 {
        match self {
            PdConvention::Printed => 1.0,
            PdConvention::Doubled => 2.0,
        }
    }
}

/// Probability-like weight that both images' ratings fall at the target MOS `qs`.
#[inline]
pub fn p_s(qs: f64, q_i: f64, sigma_i: f64, q_j: f64, sigma_j: f64) -> f64 {
    let di = qs - q_i;
    let dj = qs - q_j;
    (-(di * di) / (2.0 * sigma_i * sigma_i) - (dj * dj) / (2.0 * sigma_j * sigma_j)).exp()
}

/// Weight that the pair's MOS difference matches the target `qd`.
#[inline]
pub fn p_d(qd: f64, q_i: f64, sigma_i: f64, q_j: f64, sigma_j: f64) -> f64 {
    p_d_with(qd, q_i, sigma_i, q_j, sigma_j, PdConvention::Printed)
}

#[inline]
pub fn p_d_with(qd: f64, q_i: f64, sigma_i: f64, q_j: f64, sigma_j: f64, convention: PdConvention) -> f64 {
    let gap = qd - (q_i - q_j).abs();
    let var = convention.factor() * (sigma_i * sigma_i + sigma_j * sigma_j);
    (-(gap * gap) / var).exp()
}

/// Drops weights below `cutoff` when a cutoff is configured.
#[inline]
pub fn apply_cutoff(weight: f64, cutoff: Option<f64>) -> f64 {
    match cutoff {
        Some(c) if weight < c => 0.0,
        _ => weight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn p_s_reference_values() {
        assert_eq!(p_s(50.0, 50.0, 3.0, 50.0, 7.0), 1.0);
        assert!((p_s(40.0, 44.0, 4.0, 40.0, 2.0) - (-0.5f64).exp()).abs() < 1e-15);
        assert!((p_s(40.0, 44.0, 4.0, 42.0, 2.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((p_s(40.0, 44.0, 4.0, 42.0, 2.0) - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn p_d_reference_values() {
        assert_eq!(p_d(12.0, 30.0, 2.0, 18.0, 9.0), 1.0);
        assert_eq!(p_d(0.0, 30.0, 2.0, 30.0, 9.0), 1.0);
        // gap = 5 = sqrt(3² + 4²)
        assert!((p_d(15.0, 30.0, 3.0, 20.0, 4.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!(
            (p_d_with(15.0, 30.0, 3.0, 20.0, 4.0, PdConvention::Doubled) - (-0.5f64).exp()).abs() < 1e-15
        );
    }

    #[test]
    fn cutoff_is_off_by_default() {
        assert_eq!(apply_cutoff(1e-20, None), 1e-20);
        assert_eq!(apply_cutoff(1e-9, Some(1e-8)), 0.0);
        assert_eq!(apply_cutoff(1e-7, Some(1e-8)), 1e-7);
    }

    #[test]
    fn p_s_peak_between_equal_sigma_pair() {
        let (qi, qj, s) = (31.0, 47.0, 6.0);
        let best = (0..=10_000)
            .map(|k| k as f64 * 0.01)
            .max_by(|a, b| p_s(*a, qi, s, qj, s).total_cmp(&p_s(*b, qi, s, qj, s)))
            .unwrap();
        assert!((best - 39.0).abs() < 0.011);
    }

    proptest! {
        #[test]
        fn weights_are_symmetric(
            q in 0.0f64..100.0, qi in 0.0f64..100.0, qj in 0.0f64..100.0,
            si in 0.1f64..20.0, sj in 0.1f64..20.0,
        ) {
            prop_assert_eq!(p_s(q, qi, si, qj, sj), p_s(q, qj, sj, qi, si));
            prop_assert_eq!(p_d(q, qi, si, qj, sj), p_d(q, qj, sj, qi, si));
            prop_assert!(p_s(q, qi, si, qj, sj) <= 1.0);
            prop_assert!(p_d(q, qi, si, qj, sj) <= 1.0);
        }

        #[test]
        fn p_d_decreases_away_from_the_gap(
            qi in 0.0f64..100.0, qj in 0.0f64..100.0, si in 0.5f64..20.0, sj in 0.5f64..20.0,
            off1 in 0.0f64..30.0, off2 in 0.0f64..30.0,
        ) {
            let gap = (qi - qj).abs();
            let (near, far) = if off1 <= off2 { (off1, off2) } else { (off2, off1) };
            prop_assert!(p_d(gap + near, qi, si, qj, sj) >= p_d(gap + far, qi, si, qj, sj));
        }
    }
}
