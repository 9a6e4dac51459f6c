use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use videodna_bench::{code_corpus, noisy_excerpt};
use videodna_core::align::ScoringParams;
use videodna_core::search::{build_index, search, SearchParams};

fn search_index(c: &mut Criterion) {
    let corpus = code_corpus(200, 1000, 7);
    let index = build_index(&corpus, 4).unwrap();
    let params = SearchParams::new(ScoringParams::bitcode(32.0).unwrap());
    let mut group = c.benchmark_group("search");
    for len in [5, 10, 30] {
        let query = noisy_excerpt(&corpus, len, 3, len as u64);
        group.bench_with_input(BenchmarkId::new("query length", len), &len, |b, _| {
            b.iter(|| search(black_box(&query), &index, &params).unwrap())
        });
    }
    group.finish();

    c.bench_function("index build 200x1000", |b| {
        b.iter(|| build_index(black_box(&corpus), 4).unwrap())
    });
}

criterion_group!(benches, search_index);
criterion_main!(benches);
