use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proseg_bench::ellipsoid_pair;
use proseg_core::metrics::{hd95, surface_points};
use std::hint::black_box;

fn bench_hd95(c: &mut Criterion) {
    let mut group = c.benchmark_group("hd95");
    for n in [32usize, 64, 96] {
        let (a, b) = ellipsoid_pair(n);
        group.bench_with_input(BenchmarkId::new("symmetric", n), &n, |bench, _| {
            bench.iter(|| hd95(black_box(&a), black_box(&b), true).unwrap())
        });
    }
    group.finish();

    let (a, _) = ellipsoid_pair(96);
    c.bench_function("surface_points/96", |bench| {
        bench.iter(|| surface_points(black_box(&a)).unwrap())
    });
}

criterion_group!(benches, bench_hd95);
criterion_main!(benches);
