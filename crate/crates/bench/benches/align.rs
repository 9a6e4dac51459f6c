use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use videodna_bench::random_codes;
use videodna_core::align::{banded_local_align, local_align, ScoringParams};
use videodna_core::VideoDna;

fn align(c: &mut Criterion) {
    let params = ScoringParams::bitcode(32.0).unwrap();
    let mut group = c.benchmark_group("align");
    for n in [50, 200, 800] {
        let x = VideoDna::from_codes("x", random_codes(n, 64, 1)).unwrap();
        let y = VideoDna::from_codes("y", random_codes(n, 64, 2)).unwrap();
        group.bench_with_input(BenchmarkId::new("local", n), &n, |b, _| {
            b.iter(|| local_align(black_box(&x), black_box(&y), &params).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("banded hw=4", n), &n, |b, _| {
            b.iter(|| banded_local_align(black_box(&x), black_box(&y), &params, 0, 4).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, align);
criterion_main!(benches);
