use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use spiked_cca::experiments::{self, Execution, ExperimentConfig, ScenarioKind, ScenarioSpec, Task};
use spiked_cca::model::{EntryLaw, FactorLoadings, ModelSpec};

fn config() -> ExperimentConfig {
    let l = FactorLoadings::standard_basis(100, 100, &[4.0, 2.0, 1.0], &[2.0, 2.0, 2.0]).unwrap();
    let spec = ModelSpec::new(1000, l, EntryLaw::rademacher()).unwrap();
    ExperimentConfig::new(Task::Rank, ScenarioSpec::new(spec, ScenarioKind::A).unwrap(), 16, 1)
}

fn replications(c: &mut Criterion) {
    let cfg = config();
    let mut group = c.benchmark_group("rank-replications");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        b.iter(|| experiments::run(black_box(&cfg), Execution::Sequential).unwrap())
    });
    group.bench_function("parallel", |b| {
        b.iter(|| experiments::run(black_box(&cfg), Execution::Parallel { threads: 0 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, replications);
criterion_main!(benches);
