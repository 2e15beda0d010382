use criterion::{criterion_group, criterion_main, Criterion};

use mcts_bai::{run, Algorithm, AlgorithmConfig};

fn single_runs(c: &mut Criterion) {
    let tree = mcts_bai_bench::depth_two();
    let mut group = c.benchmark_group("depth_two_run");
    group.sample_size(20);
    for algo in [Algorithm::Ugape, Algorithm::Lucb, Algorithm::Mlucb] {
        let mut rep = 0;
        group.bench_function(algo.name(), |b| {
            b.iter(|| {
                rep += 1;
                run(
                    &tree,
                    &AlgorithmConfig {
                        repetition: rep,
                        ..AlgorithmConfig::new(algo, 0.0, 0.9)
                    },
                )
                .unwrap()
            })
        });
    }
    group.finish();

    let tree = mcts_bai_bench::depth_three();
    let mut group = c.benchmark_group("depth_three_run");
    group.sample_size(20);
    let mut rep = 0;
    group.bench_function("lucb", |b| {
        b.iter(|| {
            rep += 1;
            run(
                &tree,
                &AlgorithmConfig {
                    repetition: rep,
                    ..AlgorithmConfig::new(Algorithm::Lucb, 0.0, 2.7)
                },
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, single_runs);
criterion_main!(benches);
