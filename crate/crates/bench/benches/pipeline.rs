use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gmc_bench::noisy_dataset;
use gmc_core::surface::QueryEvaluator;
use gmc_core::{compute_gmc, fit_surface, sample_points, GmcConfig, PairMode, SamplePlan, SamplingScheme};

fn query_kernel(c: &mut Criterion) {
    let mut group = c.benchmark_group("query");
    for n in [250, 500, 1000] {
        let ds = noisy_dataset(n, 10.0, 1);
        let dm = GmcConfig::default().fit_density(&ds).unwrap();
        for mode in [PairMode::SrccRankDiff, PairMode::KrccSign] {
            let ev = QueryEvaluator::new(&ds, &dm, mode);
            group.bench_with_input(BenchmarkId::new(mode.name(), n), &ev, |b, ev| {
                b.iter(|| ev.gamma(50.0, 20.0))
            });
        }
    }
    group.finish();
}

fn surface_fit(c: &mut Criterion) {
    let ds = noisy_dataset(300, 10.0, 2);
    let dm = GmcConfig::default().fit_density(&ds).unwrap();
    let ev = QueryEvaluator::new(&ds, &dm, PairMode::SrccRankDiff);
    let plan = SamplePlan::new(100, (0.0, 100.0), (0.0, 100.0), SamplingScheme::Lhs, 0);
    let points = ev.evaluate_all(&sample_points(&plan).unwrap());
    let mut group = c.benchmark_group("surface_fit");
    for grid in [25, 50, 100] {
        group.bench_with_input(BenchmarkId::from_parameter(grid), &grid, |b, &grid| {
            b.iter(|| fit_surface(&points, (0.0, 100.0), (0.0, 100.0), grid, None).unwrap())
        });
    }
    group.finish();
}

fn full_pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("compute_gmc");
    group.sample_size(10);
    for n in [200, 1000] {
        let ds = noisy_dataset(n, 10.0, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| compute_gmc(ds, &GmcConfig::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, query_kernel, surface_fit, full_pipeline);
criterion_main!(benches);
