use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};

use mcts_bai::bounds::{depth_two_means, solve_depth2_lower_bound};
use mcts_bai::confidence::{kl_lower_bound, kl_upper_bound};
use mcts_bai::oracle::LeafOracle;
use mcts_bai::{CiFamily, ExplorationRate, RateVariant, SearchState};

fn kl_bounds(c: &mut Criterion) {
    c.bench_function("kl_upper_bound", |b| {
        b.iter(|| kl_upper_bound(black_box(0.37), black_box(0.02)))
    });
    c.bench_function("kl_lower_bound", |b| {
        b.iter(|| kl_lower_bound(black_box(0.37), black_box(0.02)))
    });
}

fn propagation(c: &mut Criterion) {
    let tree = mcts_bai_bench::wide(1);
    let rate = ExplorationRate::new(RateVariant::Experiments, tree.leaf_count(), 0.1).unwrap();
    let mut group = c.benchmark_group("record_1000_leaves");
    for ci in [CiFamily::Hoeffding, CiFamily::Kl] {
        group.bench_function(format!("{ci:?}"), |b| {
            b.iter_batched_ref(
                || (SearchState::new(&tree, rate, ci), LeafOracle::bernoulli(&tree, 1, 0)),
                |(state, oracle)| {
                    for slot in (0..tree.leaf_count()).step_by(7) {
                        state.record(slot, oracle.draw_slot(slot));
                    }
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn lower_bound(c: &mut Criterion) {
    let mu = depth_two_means(&mcts_bai_bench::depth_two()).unwrap();
    let mut group = c.benchmark_group("lower_bound");
    group.sample_size(10);
    group.bench_function("depth_two_3x3", |b| {
        b.iter(|| solve_depth2_lower_bound(black_box(&mu), 0.1).unwrap())
    });
    group.finish();
}

criterion_group!(benches, kl_bounds, propagation, lower_bound);
criterion_main!(benches);
