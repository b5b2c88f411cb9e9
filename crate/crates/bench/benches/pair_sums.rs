use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use liftlab::seminorm::{gagliardo_1d, gagliardo_nd, gagliardo_nd_direct, osc_functional_1d};
use liftlab::SeminormOptions;
use liftlab_bench::{circle_grid, circle_path, params};

fn one_dimensional(c: &mut Criterion) {
    let p = params();
    let opts = SeminormOptions::default();
    let mut g = c.benchmark_group("path");
    for n in [256usize, 1024, 4096] {
        let u = circle_path(n);
        g.bench_with_input(BenchmarkId::new("gagliardo_1d", n), &u, |b, u| {
            b.iter(|| gagliardo_1d(u, &p, &opts).unwrap().value_p)
        });
        g.bench_with_input(BenchmarkId::new("osc_functional_1d", n), &u, |b, u| {
            b.iter(|| osc_functional_1d(u, &p, &opts).unwrap().value_p)
        });
    }
    g.finish();
}

fn grids(c: &mut Criterion) {
    let p = params();
    let opts = SeminormOptions::default();
    let mut g = c.benchmark_group("grid");
    g.sample_size(10);
    for n in [16usize, 32, 64] {
        let u = circle_grid(2, n);
        g.bench_with_input(BenchmarkId::new("gagliardo_nd", n), &u, |b, u| {
            b.iter(|| gagliardo_nd(u, &p, &opts).unwrap().value_p)
        });
        if n <= 32 {
            g.bench_with_input(BenchmarkId::new("gagliardo_nd_direct", n), &u, |b, u| {
                b.iter(|| gagliardo_nd_direct(u, &p, &opts).unwrap().value_p)
            });
        }
    }
    g.finish();
}

criterion_group!(benches, one_dimensional, grids);
criterion_main!(benches);
