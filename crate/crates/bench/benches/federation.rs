use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use pfedsv_bench::simulation;
use pfedsv_core::Algorithm;

fn one_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("round");
    group.sample_size(10);
    for (label, hidden) in [("linear", None), ("mlp16", Some(16))] {
        let sim = simulation(10, hidden);
        for algorithm in [Algorithm::PFedSv, Algorithm::FedAvg] {
            group.bench_function(BenchmarkId::new(algorithm.id(), label), |b| {
                b.iter_batched(
                    || sim.clone(),
                    |mut s| s.step(algorithm).unwrap(),
                    BatchSize::LargeInput,
                )
            });
        }
    }
    group.finish();
}

criterion_group!(benches, one_round);
criterion_main!(benches);
