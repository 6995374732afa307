use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use sieve_core::eval::ndcg_at_k;
use sieve_core::model::{Corpus, Hit, Passage, RunList};
use sieve_core::{Analyzer, Bm25Params, EmbeddingMatrix, InvertedIndex};

const VOCAB: usize = 5_000;

/// Zipf-ish word draw so postings lengths vary like natural text.
fn word(rng: &mut StdRng) -> String {
    let u: f64 = rng.random_range(0.0..1.0);
    format!("w{}", ((VOCAB as f64).powf(u) as usize).min(VOCAB - 1))
}

fn corpus(n: usize, rng: &mut StdRng) -> Corpus {
    let passages = (0..n)
        .map(|i| {
            let len = rng.random_range(20..120);
            let text: Vec<String> = (0..len).map(|_| word(rng)).collect();
            Passage::new(format!("p{i:06}"), None, text.join(" "))
        })
        .collect();
    Corpus::new(passages, false).unwrap()
}

fn bm25(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(1);
    let mut group = c.benchmark_group("bm25");
    for n in [10_000, 50_000] {
        let corpus = corpus(n, &mut rng);
        group.bench_with_input(BenchmarkId::new("build", n), &corpus, |b, corpus| {
            b.iter(|| InvertedIndex::build(corpus, Analyzer::surface(), Bm25Params::default()).unwrap())
        });
        let index = InvertedIndex::build(&corpus, Analyzer::surface(), Bm25Params::default()).unwrap();
        let queries: Vec<Vec<String>> = (0..64)
            .map(|_| (0..rng.random_range(3..8)).map(|_| word(&mut rng)).collect())
            .collect();
        for k in [10, 100] {
            group.bench_function(BenchmarkId::new(format!("search_k{k}"), n), |b| {
                b.iter(|| {
                    for q in &queries {
                        black_box(index.search("q", q, k));
                    }
                })
            });
        }
    }
    group.finish();
}

fn dense(c: &mut Criterion) {
    let mut rng = StdRng::seed_from_u64(2);
    let dim = 768;
    let mut group = c.benchmark_group("dense");
    group.sample_size(20);
    for n in [10_000, 50_000] {
        let data: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ids = (0..n).map(|i| format!("p{i}")).collect();
        let matrix = EmbeddingMatrix::new(ids, dim, data, true).unwrap();
        let qdata: Vec<f32> = (0..64 * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let queries = EmbeddingMatrix::new((0..64).map(|i| format!("q{i}")).collect(), dim, qdata, true).unwrap();
        group.bench_function(BenchmarkId::new("single_k10", n), |b| {
            b.iter(|| black_box(matrix.search("q", queries.row(0), 10).unwrap()))
        });
        group.bench_function(BenchmarkId::new("batch64_k100", n), |b| {
            b.iter(|| black_box(matrix.search_batch(&queries, 100).unwrap()))
        });
    }
    group.finish();
}

fn metrics(c: &mut Criterion) {
    let hits: Vec<Hit> = (0..100).map(|i| Hit::new(format!("p{i:03}"), 100.0 - i as f64)).collect();
    let run = RunList::new("q", hits).unwrap();
    let relevant = ["p003", "p017", "p050", "p099"].iter().map(|s| s.to_string()).collect();
    c.bench_function("ndcg_at_10", |b| b.iter(|| black_box(ndcg_at_k(&run, &relevant, 10))));
}

criterion_group!(benches, bm25, dense, metrics);
criterion_main!(benches);
