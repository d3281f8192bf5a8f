use std::io::Write;

use gmc_core::dataset::LoadOptions;
use gmc_core::{
    compute_gmc, default_plans, load_scores, run_protocol, DensityMode, GmcConfig, ModelScores, SigmaSource,
};

fn score_file(rows: &[(f64, f64, Option<f64>)]) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    let with_std = rows.iter().any(|r| r.2.is_some());
    writeln!(
        f,
        "{}",
        if with_std {
            "id,pred,mos,std"
        } else {
            "id,pred,mos"
        }
    )
    .unwrap();
    for (i, (pred, mos, std)) in rows.iter().enumerate() {
        match std {
            Some(s) => writeln!(f, "img{i},{pred},{mos},{s}").unwrap(),
            None if with_std => writeln!(f, "img{i},{pred},{mos},").unwrap(),
            None => writeln!(f, "img{i},{pred},{mos}").unwrap(),
        }
    }
    f.flush().unwrap();
    f
}

fn five_point(i: usize) -> f64 {
    1.0 + 4.0 * (i as f64 * 0.618_033_988_75).fract()
}

#[test]
fn file_to_report() {
    let rows: Vec<_> = (0..150)
        .map(|i| (five_point(i) + 0.5 * (i as f64).sin(), five_point(i), None))
        .collect();
    let f = score_file(&rows);
    let ds = load_scores(f.path(), &LoadOptions::default()).unwrap();
    assert!(ds
        .samples()
        .iter()
        .all(|s| s.sigma_source == SigmaSource::BetaEstimated));
    let out = compute_gmc(
        &ds,
        &GmcConfig {
            k: 40,
            grid: 16,
            ..GmcConfig::default()
        },
    )
    .unwrap();
    let r = &out.report;
    assert_eq!(r.density_mode, DensityMode::BinnedKernelSmoothed);
    assert_eq!(out.surface.grid.len(), 256);
    assert!(r.gmc_g > 0.0 && r.gmc_g <= 1.0);
    assert!(r.baselines.srcc.unwrap() > r.gmc_g - 0.5);
    assert_eq!(r.k_used + r.excluded_count, 40);
}

#[test]
fn provided_std_selects_per_sample_density() {
    let rows: Vec<_> = (0..60)
        .map(|i| {
            (
                five_point(i) * 2.0,
                five_point(i),
                Some(0.3 + 0.01 * (i % 7) as f64),
            )
        })
        .collect();
    let f = score_file(&rows);
    let ds = load_scores(f.path(), &LoadOptions::default()).unwrap();
    assert!(ds.all_sigma_provided());
    let out = compute_gmc(
        &ds,
        &GmcConfig {
            k: 20,
            grid: 10,
            ..GmcConfig::default()
        },
    )
    .unwrap();
    assert_eq!(out.report.density_mode, DensityMode::PerSampleKde);
    assert!((out.report.gmc_g - 1.0).abs() < 1e-9);
}

#[test]
fn protocol_over_default_plans() {
    let rows: Vec<_> = (0..400)
        .map(|i| (five_point(i) + 0.4 * (i as f64 * 1.3).cos(), five_point(i), None))
        .collect();
    let f = score_file(&rows);
    let ds = load_scores(f.path(), &LoadOptions::default()).unwrap();
    let models = [
        ModelScores {
            name: "a".into(),
            pred: ds.preds(),
        },
        ModelScores {
            name: "b".into(),
            pred: ds.preds().iter().map(|p| -p).collect(),
        },
    ];
    let cfg = GmcConfig {
        k: 20,
        grid: 10,
        ..GmcConfig::default()
    };
    let report = run_protocol(&ds, &models, &default_plans(100, 3), &cfg).unwrap();
    assert_eq!(report.per_subset.len(), 9);
    assert!(report
        .per_subset
        .iter()
        .all(|r| r.size == 100 && r.scores.len() == 2));
    let (a, b) = (&report.dispersion[0], &report.dispersion[1]);
    // negating the predictions mirrors every coefficient
    assert!((a.mean_gmc_g + b.mean_gmc_g).abs() < 1e-9);
    assert!((a.std_gmc_g - b.std_gmc_g).abs() < 1e-9);
}
