use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use videodna_bench::random_codes;

fn hamming(c: &mut Criterion) {
    let mut group = c.benchmark_group("hamming");
    for bits in [64, 256] {
        let a = random_codes(4096, bits, 1);
        let b = random_codes(4096, bits, 2);
        group.throughput(Throughput::Elements(a.len() as u64));
        group.bench_function(format!("{bits} bits"), |bench| {
            bench.iter(|| {
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| black_box(x).hamming(y).unwrap())
                    .sum::<u32>()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, hamming);
criterion_main!(benches);
