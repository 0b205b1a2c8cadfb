use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use posevote_bench::{reference_scene, timing_options, METHODS};
use posevote_core::solve;

fn by_size(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_by_n");
    group.sample_size(10);
    for n in [2000, 8000] {
        let corrs = reference_scene(n, 1);
        for m in METHODS {
            let opts = timing_options(m, 0.03);
            group.bench_with_input(BenchmarkId::new(m.as_str(), n), &corrs, |b, corrs| {
                b.iter(|| solve(corrs, &opts).expect("solve"))
            });
        }
    }
    group.finish();
}

fn by_epsilon(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_by_epsilon");
    group.sample_size(10);
    let corrs = reference_scene(4000, 2);
    for eps in [0.08, 0.04, 0.02] {
        for m in METHODS {
            let opts = timing_options(m, eps);
            group.bench_with_input(BenchmarkId::new(m.as_str(), eps), &corrs, |b, corrs| {
                b.iter(|| solve(corrs, &opts).expect("solve"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, by_size, by_epsilon);
criterion_main!(benches);
