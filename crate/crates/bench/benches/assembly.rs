use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use proseg_bench::bench_phantom;
use proseg_core::assembly::{extract_top_lesions, AssemblyConfig, DetectionPool};
use proseg_core::Detection;
use std::hint::black_box;

fn bench_assembly(c: &mut Criterion) {
    let cfg = AssemblyConfig::default();
    let mut group = c.benchmark_group("assemble");
    for lesions in [1usize, 4, 7] {
        let phantom = bench_phantom(42, lesions);
        let dets: Vec<Detection> = phantom
            .detections
            .into_iter()
            .filter(|d| d.label == "lesion")
            .collect();
        group.bench_with_input(BenchmarkId::from_parameter(lesions), &dets, |bench, dets| {
            bench.iter(|| {
                let mut pool = DetectionPool::from_detections(black_box(dets.clone()))
                    .nms(&cfg)
                    .unwrap();
                extract_top_lesions(&mut pool, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_assembly);
criterion_main!(benches);
