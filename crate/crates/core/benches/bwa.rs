use std::hint::black_box;

use bwa::oracle::{self, EquivalenceConfig, OpMix};
use bwa::{BlackWhiteArray, GrowthPolicy};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_values(n: usize, seed: u64) -> Vec<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

fn insert(c: &mut Criterion) {
    let values = random_values(1 << 14, 1);
    let mut g = c.benchmark_group("insert");
    g.throughput(Throughput::Elements(values.len() as u64));
    g.bench_function("2^14", |b| {
        b.iter_batched(
            || BlackWhiteArray::new(15, GrowthPolicy::Fixed).unwrap(),
            |mut a| {
                for &v in &values {
                    a.insert(v).unwrap();
                }
                a
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn search_batch(c: &mut Criterion) {
    let a: BlackWhiteArray<i32> = random_values((1 << 20) - 1, 2).into_iter().collect();
    let probes = random_values(1 << 16, 3);
    let mut g = c.benchmark_group("search_batch");
    g.throughput(Throughput::Elements(probes.len() as u64));
    g.bench_function("sequential", |b| b.iter(|| a.search_batch_sequential(black_box(&probes))));
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| a.search_batch(black_box(&probes))));
    g.finish();
}

fn verify_many(c: &mut Criterion) {
    let cfg = EquivalenceConfig {
        seed: 0,
        n: 20_000,
        mix: OpMix::standard(),
        hit_ratio: 0.5,
        cap_exp: 10,
    };
    let mut g = c.benchmark_group("verify_8_seeds");
    g.sample_size(10);
    g.bench_function("sequential", |b| {
        b.iter(|| oracle::run_equivalence_many_sequential(&cfg, 0..8).unwrap())
    });
    #[cfg(feature = "parallel")]
    g.bench_function("parallel", |b| b.iter(|| oracle::run_equivalence_many(&cfg, 0..8).unwrap()));
    g.finish();
}

criterion_group!(benches, insert, search_batch, verify_many);
criterion_main!(benches);
