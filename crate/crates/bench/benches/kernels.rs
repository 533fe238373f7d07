use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use exmlds::embed::factorize_embeddings;
use exmlds::linalg::{gram, CosineIndex, SvdOptions};
use exmlds::regress::{admm_ridge, direct_ridge, AdmmOptions};
use exmlds::sppmi::sppmi;
use exmlds_bench::{generate, SyntheticSpec};

fn pipeline(c: &mut Criterion) {
    let data = generate(&SyntheticSpec::small(), 1);
    let m = gram(&data.labels);
    let s = sppmi(&m, 5.0).unwrap();
    let z = factorize_embeddings(&s, 20, &SvdOptions::default()).unwrap();

    c.bench_function("gram", |b| b.iter(|| gram(black_box(&data.labels))));
    c.bench_function("sppmi", |b| b.iter(|| sppmi(black_box(&m), 5.0).unwrap()));

    let mut g = c.benchmark_group("svd");
    g.sample_size(10);
    for dim in [10, 20, 40] {
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &dim| {
            b.iter(|| factorize_embeddings(&s, dim, &SvdOptions::default()).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("ridge");
    g.sample_size(10);
    g.bench_function("admm", |b| {
        b.iter(|| admm_ridge(&data.features, &z, &AdmmOptions::with_lambda(0.1)).unwrap())
    });
    g.bench_function("direct", |b| {
        b.iter(|| direct_ridge(&data.features, &z, 0.1).unwrap())
    });
    g.finish();

    let index = CosineIndex::new(&z);
    let query = z.row(7).to_vec();
    c.bench_function("knn_500x20", |b| {
        b.iter(|| index.search(black_box(&query), 10, None))
    });
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
