//! Sequential versus rayon execution of the same sweep, plus the cost of one
//! trial at the largest default feature dimension.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use forgetting_lab::experiments::{run_sweep, run_trial, Execution, ModelVariant, SweepSpec, TrialOptions, VariantSelection};
use forgetting_lab::linalg::RngStream;
use forgetting_lab::model::ModelConfig;
use forgetting_lab::risk::TestSampler;

fn spec() -> SweepSpec {
    SweepSpec {
        grid: [1000, 2000, 4000].map(|p| ModelConfig::new(5, 50, p, 1.0)).to_vec(),
        trials_per_point: 8,
        n_test: 2000,
        root_seed: 1,
        model_variant: VariantSelection::Latent,
        sampler: TestSampler::Projected,
    }
}

fn execution(c: &mut Criterion) {
    let spec = spec();
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| run_sweep(&spec, Execution::Sequential).unwrap()));
    group.bench_function(BenchmarkId::new("parallel", threads), |b| {
        b.iter(|| run_sweep(&spec, Execution::Parallel).unwrap())
    });
    group.finish();
}

fn single_trial(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial");
    group.sample_size(10);
    for p in [2000, 16000] {
        let cfg = ModelConfig::new(5, 100, p, 1.0);
        group.bench_with_input(BenchmarkId::new("latent", p), &cfg, |b, cfg| {
            b.iter(|| run_trial(cfg, ModelVariant::Latent, RngStream::new(3, 0), 0, TrialOptions::default()))
        });
    }
    group.finish();
}

criterion_group!(benches, execution, single_trial);
criterion_main!(benches);
