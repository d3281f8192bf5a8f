use std::collections::HashSet;
use std::path::Path;

use gmc_core::dataset::{read_records, LoadOptions};
use gmc_core::robustness::default_subset_size;
use gmc_core::{
    combine_scores, compute_gmc, default_plans, load_scores, run_ablation_sampling, run_protocol, Dataset,
    GmcConfig, GmcOutcome, ModelScores, ResamplePlan, SamplingScheme,
};
use log::{info, warn};
use rayon::prelude::*;

use crate::args::{AblationArgs, CombineArgs, EvalArgs, PipelineArgs, RobustnessArgs};
use crate::error::{CliError, CliResult};
use crate::output::{num, write_atomic, write_json, Table};
use crate::svg::render_heatmap;

/// Settings from `--config` (or defaults) with command-line flags applied on top.
pub fn build_config(args: &PipelineArgs) -> CliResult<GmcConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => GmcConfig::default(),
    };
    if let Some(m) = args.metric {
        cfg.metric_mode = m.into();
    }
    if let Some(k) = args.k {
        cfg.k = k;
    }
    if let Some(b) = args.bins {
        cfg.bins = b;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.sampler {
        cfg.scheme = s.into();
    }
    if args.no_kernel_smoothing {
        cfg.kernel_smoothing = false;
    }
    if let Some(h) = args.density_bandwidth {
        cfg.density_bandwidth = h;
    }
    if args.qs_range.is_some() {
        cfg.qs_range = args.qs_range;
    }
    if args.qd_range.is_some() {
        cfg.qd_range = args.qd_range;
    }
    if let Some(c) = args.pd_variance_convention {
        cfg.pd_convention = c.into();
    }
    if args.weight_cutoff.is_some() {
        cfg.weight_cutoff = args.weight_cutoff;
    }
    if args.independent_u {
        cfg.shared_u = false;
    }
    validate(&cfg, args.phi)?;
    Ok(cfg)
}

fn validate(cfg: &GmcConfig, phi: f64) -> CliResult<()> {
    let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
    if cfg.k == 0 {
        return bad("--k must be at least 1");
    }
    if cfg.grid == 0 {
        return bad("--grid must be at least 1");
    }
    if cfg.bins == 0 {
        return bad("--bins must be at least 1");
    }
    if !(cfg.density_bandwidth > 0.0 && cfg.density_bandwidth.is_finite()) {
        return bad("--density-bandwidth must be positive");
    }
    if !(cfg.density_floor > 0.0) {
        return bad("density_floor must be positive");
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return bad("--phi must be positive");
    }
    if matches!(cfg.weight_cutoff, Some(c) if !(c >= 0.0)) {
        return bad("--weight-cutoff must be nonnegative");
    }
    Ok(())
}

/// Loads every input and checks that they all score the same images.
pub fn load_inputs(args: &PipelineArgs) -> CliResult<Vec<(String, Dataset)>> {
    let mut seen = HashSet::new();
    for input in &args.inputs {
        if !seen.insert(input.name.as_str()) {
            return Err(CliError::Config(format!(
                "model name `{}` given twice",
                input.name
            )));
        }
    }
    let options = LoadOptions {
        format: None,
        scale_override: args.scale,
        phi: args.phi,
    };
    let loaded = args
        .inputs
        .iter()
        .map(|input| Ok((input.name.clone(), load_scores(&input.path, &options)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let (reference, first) = &loaded[0];
    for (name, ds) in &loaded[1..] {
        if let Some(idx) = first.first_mos_mismatch(ds) {
            return Err(gmc_core::Error::MosMismatch {
                model: name.clone(),
                reference: reference.clone(),
                row: idx + 1,
            }
            .into());
        }
    }
    Ok(loaded)
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let p = &args.pipeline;
    let mut cfg = build_config(p)?;
    let models = load_inputs(p)?;
    // Pin the ranges so every model is integrated over the same box.
    let (qs, qd) = cfg.ranges_for(&models[0].1)?;
    cfg.qs_range = Some(qs);
    cfg.qd_range = Some(qd);

    let outcomes = models
        .par_iter()
        .map(|(name, ds)| {
            let out = compute_gmc(ds, &cfg)?;
            write_model(&p.out.join(name), name, &out, args.render_svg)?;
            Ok(out)
        })
        .collect::<CliResult<Vec<GmcOutcome>>>()?;

    let mut summary = Table::new(&[
        "model", "gmc_g", "LQ", "MQ", "HQ", "LD", "MD", "HD", "PLCC", "SRCC", "KRCC", "excluded",
    ]);
    for ((name, _), out) in models.iter().zip(&outcomes) {
        let r = &out.report;
        println!(
            "{name}: GMC_g={:.4} SRCC={} PLCC={} KRCC={}",
            r.gmc_g,
            fmt4(r.baselines.srcc),
            fmt4(r.baselines.plcc),
            fmt4(r.baselines.krcc)
        );
        summary.row([
            name.clone(),
            num(Some(r.gmc_g)),
            num(Some(r.gmc_s.lq)),
            num(Some(r.gmc_s.mq)),
            num(Some(r.gmc_s.hq)),
            num(Some(r.gmc_d.ld)),
            num(Some(r.gmc_d.md)),
            num(Some(r.gmc_d.hd)),
            num(r.baselines.plcc),
            num(r.baselines.srcc),
            num(r.baselines.krcc),
            r.excluded_count.to_string(),
        ]);
    }
    summary.write(&p.out.join("summary.csv"))
}

fn fmt4(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "undefined".into())
}

fn write_model(dir: &Path, name: &str, out: &GmcOutcome, svg: bool) -> CliResult<()> {
    write_json(&dir.join("report.json"), &out.report)?;

    let mut surface = Table::new(&["qs", "qd", "value"]);
    for (qs, qd, v) in out.surface.long_rows() {
        surface.row([num(Some(qs)), num(Some(qd)), num(Some(v))]);
    }
    surface.write(&dir.join("surface.csv"))?;

    let mut queries = Table::new(&["k", "qs", "qd", "gamma"]);
    for (k, q) in out.queries.iter().enumerate() {
        queries.row([k.to_string(), num(Some(q.qs)), num(Some(q.qd)), num(q.gamma)]);
    }
    queries.write(&dir.join("queries.csv"))?;

    if svg {
        let title = format!("{name}: GMC_g = {:.4}", out.report.gmc_g);
        write_atomic(
            &dir.join("surface.svg"),
            render_heatmap(&out.surface, &title).as_bytes(),
        )?;
    }
    info!("wrote {}", dir.display());
    Ok(())
}

pub fn robustness(args: &RobustnessArgs) -> CliResult<()> {
    let p = &args.pipeline;
    let cfg = build_config(p)?;
    let inputs = load_inputs(p)?;
    let ds = &inputs[0].1;
    let models: Vec<ModelScores> = inputs
        .iter()
        .map(|(name, d)| ModelScores {
            name: name.clone(),
            pred: d.preds(),
        })
        .collect();
    let plans: Vec<ResamplePlan> = match &args.plans {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => default_plans(
            args.subset_size.unwrap_or_else(|| default_subset_size(ds.len())),
            cfg.seed,
        ),
    };
    let report = run_protocol(ds, &models, &plans, &cfg)?;

    write_json(&p.out.join("robustness.json"), &report)?;
    let mut subsets = Table::new(&[
        "plan",
        "size",
        "mean_mos",
        "density_fingerprint",
        "model",
        "srcc",
        "gmc_g",
    ]);
    for row in &report.per_subset {
        for (m, score) in report.models.iter().zip(&row.scores) {
            subsets.row([
                row.label.clone(),
                row.size.to_string(),
                num(Some(row.mean_mos)),
                row.density_fingerprint.clone(),
                m.clone(),
                num(score.srcc),
                num(Some(score.gmc_g)),
            ]);
        }
    }
    subsets.write(&p.out.join("subsets.csv"))?;
    let mut dispersion = Table::new(&["model", "mean_srcc", "std_srcc", "mean_gmc_g", "std_gmc_g"]);
    for d in &report.dispersion {
        println!(
            "{}: std(SRCC)={:.5} std(GMC_g)={:.5} over {} subsets",
            d.model,
            d.std_srcc,
            d.std_gmc_g,
            report.per_subset.len()
        );
        dispersion.row([
            d.model.clone(),
            num(Some(d.mean_srcc)),
            num(Some(d.std_srcc)),
            num(Some(d.mean_gmc_g)),
            num(Some(d.std_gmc_g)),
        ]);
    }
    dispersion.write(&p.out.join("dispersion.csv"))
}

pub fn ablation(args: &AblationArgs) -> CliResult<()> {
    let p = &args.pipeline;
    let cfg = build_config(p)?;
    if args.k_values.is_empty() || args.k_values.contains(&0) {
        return Err(CliError::Config(
            "--k-values must be a nonempty list of positive counts".into(),
        ));
    }
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let inputs = load_inputs(p)?;
    let schemes: Vec<SamplingScheme> = args.schemes.iter().map(|&s| s.into()).collect();
    let seeds: Vec<u64> = (0..args.seeds).map(|i| cfg.seed.wrapping_add(i)).collect();

    let mut rows = Table::new(&["model", "scheme", "k", "seed", "gmc_g"]);
    let mut summary = Table::new(&["model", "scheme", "k", "seeds", "mean_gmc_g", "std_gmc_g"]);
    for (name, ds) in &inputs {
        let table = run_ablation_sampling(ds, &cfg, &schemes, &args.k_values, &seeds)?;
        for r in &table.rows {
            rows.row([
                name.clone(),
                r.scheme.to_string(),
                r.k.to_string(),
                r.seed.to_string(),
                num(Some(r.gmc_g)),
            ]);
        }
        for s in &table.summary {
            println!(
                "{name} {:>6} K={:<5} mean={:.5} std={:.5}",
                s.scheme.to_string(),
                s.k,
                s.mean_gmc_g,
                s.std_gmc_g
            );
            summary.row([
                name.clone(),
                s.scheme.to_string(),
                s.k.to_string(),
                s.seeds.to_string(),
                num(Some(s.mean_gmc_g)),
                num(Some(s.std_gmc_g)),
            ]);
        }
    }
    rows.write(&p.out.join("ablation.csv"))?;
    summary.write(&p.out.join("ablation_summary.csv"))
}

pub fn combine(args: &CombineArgs) -> CliResult<()> {
    let a = read_records(&args.a, None)?;
    let b = read_records(&args.b, None)?;
    let pa: Vec<f64> = a.iter().map(|r| r.pred).collect();
    let pb: Vec<f64> = b.iter().map(|r| r.pred).collect();
    let combined = combine_scores(&pa, args.polarity_a.into(), &pb, args.polarity_b.into())?;
    if let Some(i) = a.iter().zip(&b).position(|(x, y)| x.id != y.id) {
        warn!(
            "row {}: ids differ ({:?} vs {:?}); rows are combined by position",
            i + 1,
            a[i].id,
            b[i].id
        );
    }
    let mut out = Table::new(&["id", "pred", "mos", "std"]);
    for (r, v) in a.iter().zip(combined) {
        out.row([r.id.clone(), num(Some(v)), num(Some(r.mos)), num(r.std)]);
    }
    out.write(&args.out)?;
    println!("wrote {} combined scores to {}", a.len(), args.out.display());
    Ok(())
}
