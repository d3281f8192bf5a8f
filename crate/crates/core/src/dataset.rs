//! Score-file ingestion, MOS normalization and ranking.

use std::collections::HashMap;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lower clamp for the Beta mean so σ stays positive at the scale endpoints.
pub const MU_FLOOR: f64 = 0.01;

/// Default Beta dispersion used when a score file carries no `std` column.
pub const DEFAULT_PHI: f64 = 20.0;

/// Upper end of the canonical MOS scale.
pub const CANONICAL_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SigmaSource {
    Provided,
    BetaEstimated,
}

/// One image: model prediction, MOS on the canonical `[0, 100]` scale and the
/// standard deviation of its subjective ratings in the same units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub pred: f64,
    pub mos: f64,
    pub sigma: f64,
    pub sigma_source: SigmaSource,
}

/// A row as it appears in a score file, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub id: String,
    pub pred: f64,
    pub mos: f64,
    pub std: Option<f64>,
}

impl RawRecord {
    pub fn new(id: impl Into<String>, pred: f64, mos: f64, std: Option<f64>) -> Self {
        Self {
            id: id.into(),
            pred,
            mos,
            std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreFormat {
    Csv,
    Json,
}

impl ScoreFormat {
    /// Guesses the format from the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => ScoreFormat::Json,
            _ => ScoreFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    pub format: Option<ScoreFormat>,
    /// Raw `(min, max)` of the MOS scale. Defaults to the empirical range.
    pub scale_override: Option<(f64, f64)>,
    /// Beta dispersion φ used to estimate missing σ.
    pub phi: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            format: None,
            scale_override: None,
            phi: DEFAULT_PHI,
        }
    }
}

/// Normalized samples with precomputed mid-ranks. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    pred_ranks: Vec<f64>,
    mos_ranks: Vec<f64>,
    scale_bounds: (f64, f64),
}

impl Dataset {
    /// Normalizes raw records to the canonical scale and fills in missing σ.
    pub fn from_records(records: &[RawRecord], scale_override: Option<(f64, f64)>, phi: f64) -> Result<Self> {
        if records.len() < 3 {
            return Err(Error::FewerThanThreeSamples(records.len()));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::Config(format!(
                "dispersion phi must be positive, got {phi}"
            )));
        }
        let (lo, hi) = match scale_override {
            Some((lo, hi)) => {
                if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidRange { min: lo, max: hi });
                }
                (lo, hi)
            }
            None => {
                let lo = records.iter().map(|r| r.mos).fold(f64::INFINITY, f64::min);
                let hi = records.iter().map(|r| r.mos).fold(f64::NEG_INFINITY, f64::max);
                if hi == lo {
                    return Err(Error::DegenerateScale(lo));
                }
                (lo, hi)
            }
        };
        let span = hi - lo;
        let factor = CANONICAL_MAX / span;

        let mut samples = Vec::with_capacity(records.len());
        for (row, r) in records.iter().enumerate() {
            if !r.pred.is_finite() || !r.mos.is_finite() {
                return Err(Error::InvalidValue {
                    path: String::new(),
                    row: row + 1,
                    message: "non-finite score".into(),
                });
            }
            if r.mos < lo || r.mos > hi {
                return Err(Error::InvalidValue {
                    path: String::new(),
                    row: row + 1,
                    message: format!("mos {} outside the scale ({lo}, {hi})", r.mos),
                });
            }
            let mos = ((r.mos - lo) / span * CANONICAL_MAX).clamp(0.0, CANONICAL_MAX);
            let (sigma, sigma_source) = match r.std {
                Some(s) => {
                    if !(s.is_finite() && s > 0.0) {
                        return Err(Error::InvalidValue {
                            path: String::new(),
                            row: row + 1,
                            message: format!("std must be finite and positive, got {s}"),
                        });
                    }
                    (s * factor, SigmaSource::Provided)
                }
                None => (estimate_sigma(mos, phi), SigmaSource::BetaEstimated),
            };
            samples.push(Sample {
                id: r.id.clone(),
                pred: r.pred,
                mos,
                sigma,
                sigma_source,
            });
        }
        Self::from_normalized(samples, (lo, hi))
    }

    /// Builds a dataset from samples already on the canonical scale.
    pub fn from_normalized(samples: Vec<Sample>, scale_bounds: (f64, f64)) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::FewerThanThreeSamples(samples.len()));
        }
        for (row, s) in samples.iter().enumerate() {
            if !(0.0..=CANONICAL_MAX).contains(&s.mos) || !s.pred.is_finite() {
                return Err(Error::InvalidValue {
                    path: String::new(),
                    row: row + 1,
                    message: format!("mos {} outside [0, 100] or non-finite pred", s.mos),
                });
            }
            if !(s.sigma.is_finite() && s.sigma > 0.0) {
                return Err(Error::InvalidValue {
                    path: String::new(),
                    row: row + 1,
                    message: format!("sigma must be finite and positive, got {}", s.sigma),
                });
            }
        }
        let preds: Vec<f64> = samples.iter().map(|s| s.pred).collect();
        let mos: Vec<f64> = samples.iter().map(|s| s.mos).collect();
        Ok(Self {
            pred_ranks: mid_ranks(&preds),
            mos_ranks: mid_ranks(&mos),
            samples,
            scale_bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn pred_ranks(&self) -> &[f64] {
        &self.pred_ranks
    }

    pub fn mos_ranks(&self) -> &[f64] {
        &self.mos_ranks
    }

    pub fn scale_bounds(&self) -> (f64, f64) {
        self.scale_bounds
    }

    pub fn preds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.pred).collect()
    }

    pub fn mos(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.mos).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.sigma).collect()
    }

    pub fn all_sigma_provided(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.sigma_source == SigmaSource::Provided)
    }

    /// Empirical `(min, max)` of the normalized MOS.
    pub fn mos_extent(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.mos), hi.max(s.mos))
            })
    }

    /// Same MOS and σ, different model predictions.
    pub fn with_preds(&self, preds: &[f64]) -> Result<Self> {
        if preds.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: preds.len(),
            });
        }
        let samples = self
            .samples
            .iter()
            .zip(preds)
            .map(|(s, &p)| Sample { pred: p, ..s.clone() })
            .collect();
        Self::from_normalized(samples, self.scale_bounds)
    }

    /// The samples at `indices`, in the given order, re-ranked.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Self::from_normalized(samples, self.scale_bounds)
    }

    /// Index of the first row whose normalized MOS differs from `other`, or the
    /// shorter length if one column is a prefix of the other.
    pub fn first_mos_mismatch(&self, other: &Dataset) -> Option<usize> {
        let shared = self.len().min(other.len());
        (0..shared)
            .find(|&i| self.samples[i].mos.to_bits() != other.samples[i].mos.to_bits())
            .or((self.len() != other.len()).then_some(shared))
    }

    /// Hex SHA-256 over the normalized MOS column, used to check that several model
    /// files score the same images.
    pub fn mos_digest(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.samples {
            hasher.update(s.mos.to_le_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

/// Beta-distribution estimate of the rating standard deviation at a normalized MOS.
///
/// The Beta mean is `mos / 100`, clamped to `[0.01, 0.99]`; its variance is
/// `μ(1 − μ) / (1 + φ)`.
pub fn estimate_sigma(mos: f64, phi: f64) -> f64 {
    let mu = (mos / CANONICAL_MAX).clamp(MU_FLOOR, 1.0 - MU_FLOOR);
    CANONICAL_MAX * (mu * (1.0 - mu) / (1.0 + phi)).sqrt()
}

/// 1-based ranks with ties sharing the average of the positions they occupy.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

/// Reads a score file (`id,pred,mos[,std]`) and normalizes it.
pub fn load_scores(path: &Path, options: &LoadOptions) -> Result<Dataset> {
    let records = read_records(path, options.format)?;
    let display = path.display().to_string();
    Dataset::from_records(&records, options.scale_override, options.phi).map_err(|e| match e {
        Error::InvalidValue { row, message, .. } => Error::InvalidValue {
            path: display,
            row,
            message,
        },
        other => other,
    })
}

/// Parses the raw rows of a score file without normalizing them.
pub fn read_records(path: &Path, format: Option<ScoreFormat>) -> Result<Vec<RawRecord>> {
    match format.unwrap_or_else(|| ScoreFormat::from_path(path)) {
        ScoreFormat::Csv => read_csv(path),
        ScoreFormat::Json => read_json(path),
    }
}

const KNOWN_COLUMNS: [&str; 4] = ["id", "pred", "mos", "std"];

fn read_csv(path: &Path) -> Result<Vec<RawRecord>> {
    let display = path.display().to_string();
    let csv_err = |source| Error::Csv {
        path: display.clone(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let mut columns: HashMap<&str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        match KNOWN_COLUMNS.iter().find(|k| **k == h) {
            Some(k) => {
                columns.insert(k, i);
            }
            None => warn!("{display}: ignoring unknown column `{h}`"),
        }
    }
    for required in ["id", "pred", "mos"] {
        if !columns.contains_key(required) {
            return Err(Error::MissingColumn {
                path: display,
                column: required.into(),
            });
        }
    }

    let mut records = Vec::new();
    for (row_idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let row_no = row_idx + 1;
        let field = |name: &str| row.get(columns[name]).unwrap_or("");
        let number = |name: &str| -> Result<f64> {
            let raw = field(name);
            raw.parse::<f64>().map_err(|_| Error::NonNumericValue {
                path: display.clone(),
                row: row_no,
                column: name.into(),
                value: raw.into(),
            })
        };
        let std = match columns.get("std") {
            Some(_) if !field("std").is_empty() => Some(number("std")?),
            _ => None,
        };
        records.push(RawRecord {
            id: field("id").to_string(),
            pred: number("pred")?,
            mos: number("mos")?,
            std,
        });
    }
    Ok(records)
}

fn read_json(path: &Path) -> Result<Vec<RawRecord>> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: display.clone(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: display.clone(),
        source,
    })?;
    let rows = value.as_array().ok_or_else(|| Error::InvalidValue {
        path: display.clone(),
        row: 0,
        message: "expected a JSON array of objects".into(),
    })?;

    let mut warned = std::collections::BTreeSet::new();
    let mut records = Vec::with_capacity(rows.len());
    for (row_idx, row) in rows.iter().enumerate() {
        let row_no = row_idx + 1;
        let obj = row.as_object().ok_or_else(|| Error::InvalidValue {
            path: display.clone(),
            row: row_no,
            message: "expected an object".into(),
        })?;
        for key in obj.keys() {
            if !KNOWN_COLUMNS.contains(&key.as_str()) && warned.insert(key.clone()) {
                warn!("{display}: ignoring unknown column `{key}`");
            }
        }
        let get = |name: &str| -> Result<&serde_json::Value> {
            obj.get(name).ok_or_else(|| Error::MissingColumn {
                path: display.clone(),
                column: name.into(),
            })
        };
        let number = |name: &str, v: &serde_json::Value| -> Result<f64> {
            let parsed = match v {
                serde_json::Value::Number(n) => n.as_f64(),
                serde_json::Value::String(s) => s.trim().parse().ok(),
                _ => None,
            };
            parsed.ok_or_else(|| Error::NonNumericValue {
                path: display.clone(),
                row: row_no,
                column: name.into(),
                value: v.to_string(),
            })
        };
        let id = match get("id")? {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let std = match obj.get("std") {
            None | Some(serde_json::Value::Null) => None,
            Some(v) => Some(number("std", v)?),
        };
        records.push(RawRecord {
            id,
            pred: number("pred", get("pred")?)?,
            mos: number("mos", get("mos")?)?,
            std,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn recs(mos: &[f64]) -> Vec<RawRecord> {
        mos.iter()
            .enumerate()
            .map(|(i, &m)| RawRecord::new(format!("img{i}"), i as f64, m, None))
            .collect()
    }

    #[test]
    fn normalizes_to_canonical_scale() {
        let ds = Dataset::from_records(&recs(&[1.0, 3.0, 5.0]), Some((1.0, 5.0)), 20.0).unwrap();
        assert_eq!(ds.mos(), vec![0.0, 50.0, 100.0]);
        let ds = Dataset::from_records(&recs(&[1.0, 3.0, 5.0]), None, 20.0).unwrap();
        assert_eq!(ds.mos(), vec![0.0, 50.0, 100.0]);
        assert_eq!(ds.scale_bounds(), (1.0, 5.0));
    }

    #[test]
    fn rejects_fewer_than_three() {
        let err = Dataset::from_records(&recs(&[20.0, 80.0]), None, 20.0).unwrap_err();
        assert!(matches!(err, Error::FewerThanThreeSamples(2)));
    }

    #[test]
    fn rejects_degenerate_scale() {
        let err = Dataset::from_records(&recs(&[4.0, 4.0, 4.0]), None, 20.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateScale(_)));
    }

    #[test]
    fn mid_ranks_share_ties() {
        let r = mid_ranks(&[10.0, 20.0, 20.0, 30.0]);
        assert_eq!(r, vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(r.iter().sum::<f64>(), 10.0);
        assert_eq!(mid_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn sigma_rescaled_with_mos() {
        let records = vec![
            RawRecord::new("a", 0.0, 1.0, Some(0.5)),
            RawRecord::new("b", 1.0, 3.0, Some(0.2)),
            RawRecord::new("c", 2.0, 5.0, None),
        ];
        let ds = Dataset::from_records(&records, None, 20.0).unwrap();
        let s = ds.samples();
        assert!((s[0].sigma - 12.5).abs() < 1e-12);
        assert!((s[1].sigma - 5.0).abs() < 1e-12);
        assert_eq!(s[0].sigma_source, SigmaSource::Provided);
        assert_eq!(s[2].sigma_source, SigmaSource::BetaEstimated);
        assert!((s[2].sigma - estimate_sigma(100.0, 20.0)).abs() < 1e-15);
        assert!(!ds.all_sigma_provided());
    }

    #[test]
    fn estimate_sigma_values() {
        assert!((estimate_sigma(50.0, 20.0) - 10.910894511799619).abs() < 1e-9);
        assert!((estimate_sigma(0.0, 20.0) - 2.171240593367655).abs() < 1e-9);
        assert!(estimate_sigma(50.0, 1e12) < 1e-4);
        assert!(estimate_sigma(50.0, 1e12) > 0.0);
    }

    #[test]
    fn loads_csv_with_unknown_column() {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        writeln!(f, "id,pred,mos,extra,std").unwrap();
        writeln!(f, "a,0.1,1,x,0.5").unwrap();
        writeln!(f, "b,0.2,3,y,").unwrap();
        writeln!(f, "c,0.3,5,z,0.25").unwrap();
        let ds = load_scores(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.mos(), vec![0.0, 50.0, 100.0]);
        assert_eq!(ds.samples()[1].sigma_source, SigmaSource::BetaEstimated);
        assert_eq!(ds.samples()[2].sigma_source, SigmaSource::Provided);
    }

    #[test]
    fn csv_errors_name_the_problem() {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        writeln!(f, "id,pred\na,1\nb,2\nc,3").unwrap();
        let err = load_scores(f.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "mos"));

        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        writeln!(f, "id,pred,mos\na,1,2\nb,oops,3\nc,3,4").unwrap();
        let err = load_scores(f.path(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonNumericValue { row: 2, .. }), "{err}");
    }

    #[test]
    fn loads_json() {
        let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
        write!(
            f,
            r#"[{{"id":"a","pred":1,"mos":1}},{{"id":2,"pred":"2","mos":3,"std":null}},{{"id":"c","pred":3,"mos":5,"std":0.1,"note":"x"}}]"#
        )
        .unwrap();
        let ds = load_scores(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(ds.samples()[1].id, "2");
        assert_eq!(ds.mos(), vec![0.0, 50.0, 100.0]);
        assert_eq!(ds.samples()[2].sigma_source, SigmaSource::Provided);
    }

    #[test]
    fn strictly_increasing_preds_rank_in_order() {
        let ds = Dataset::from_records(&recs(&[5.0, 1.0, 3.0, 2.0, 4.0]), None, 20.0).unwrap();
        assert_eq!(ds.pred_ranks(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ds.mos_ranks(), &[5.0, 1.0, 3.0, 2.0, 4.0]);
    }

    proptest::proptest! {
        #[test]
        fn rank_sum_is_triangular(values in proptest::collection::vec(0u8..20, 3..60)) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let n = values.len() as f64;
            let sum: f64 = mid_ranks(&values).iter().sum();
            proptest::prop_assert_eq!(sum, n * (n + 1.0) / 2.0);
        }

        #[test]
        fn sigma_symmetric_and_peaked_mid_scale(mos in 0.0f64..=100.0, phi in 0.1f64..100.0) {
            let a = estimate_sigma(mos, phi);
            let b = estimate_sigma(100.0 - mos, phi);
            proptest::prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            proptest::prop_assert!(a <= estimate_sigma(50.0, phi) + 1e-12);
            proptest::prop_assert!(a > 0.0);
        }

        #[test]
        fn normalization_is_affine_invariant(
            mos in proptest::collection::vec(1.0f64..5.0, 3..30),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let base = recs(&mos);
            let moved: Vec<RawRecord> = base
                .iter()
                .map(|r| RawRecord { mos: scale * r.mos + shift, ..r.clone() })
                .collect();
            let a = Dataset::from_records(&base, Some((1.0, 5.0)), 20.0).unwrap();
            let b = Dataset::from_records(
                &moved,
                Some((scale + shift, 5.0 * scale + shift)),
                20.0,
            ).unwrap();
            proptest::prop_assert_eq!(a.pred_ranks(), b.pred_ranks());
            for (x, y) in a.samples().iter().zip(b.samples()) {
                proptest::prop_assert!((x.mos - y.mos).abs() < 1e-9);
                proptest::prop_assert!((x.sigma - y.sigma).abs() < 1e-9);
            }
        }
    }
}
