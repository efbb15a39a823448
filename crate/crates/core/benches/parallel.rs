use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairsynth_core::dataset::Role;
use fairsynth_core::marginals::{one_way, pairwise_l1_scores};
use fairsynth_core::par::Exec;
use fairsynth_core::pipeline::{generate, RunConfig};
use fairsynth_core::rng::RngSeed;
use fairsynth_core::selection::SelectorMode;
use fairsynth_core::sources::random_tree_source;
use std::hint::black_box;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn wide_source() -> fairsynth_core::sources::DagSource {
    let d = 40;
    let domains: Vec<usize> = (0..d).map(|i| 2 + i % 6).collect();
    let roles: Vec<Role> = (0..d)
        .map(|i| match i {
            0 => Role::Protected,
            1 => Role::Outcome,
            _ if i % 3 == 0 => Role::Admissible,
            _ => Role::Unlabeled,
        })
        .collect();
    random_tree_source(&domains, &roles, 0.8, RngSeed(1)).unwrap()
}

fn scores(c: &mut Criterion) {
    let table = wide_source().sample(50_000, RngSeed(2), Exec::Parallel).unwrap();
    let ones: Vec<_> = (0..table.n_attributes()).map(|i| one_way(&table, i).unwrap()).collect();
    let mut group = c.benchmark_group("pairwise_scores");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pairwise_l1_scores(black_box(&table), &ones, exec).unwrap())
        });
    }
    group.finish();
}

fn sampling(c: &mut Criterion) {
    let table = wide_source().sample(20_000, RngSeed(3), Exec::Parallel).unwrap();
    let model = generate(&table, &RunConfig::noiseless(SelectorMode::Greedy)).unwrap().model;
    let mut group = c.benchmark_group("tree_sampling");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| model.sample(black_box(200_000), RngSeed(4), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scores, sampling);
criterion_main!(benches);
