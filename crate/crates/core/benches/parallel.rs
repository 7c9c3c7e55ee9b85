use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use detline::detline::Twisted;
use detline::families;
use detline::local_system::{Field, LocalSystem};
use detline::par::Parallelism;
use detline::scalar::{Scalar, C64, Q};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Regaugings of the trivial rank-2 system on a complex, one per seed.
fn batch<S: Scalar>(c: &Arc<detline::complex::Complex>, field: Field, count: u64) -> Vec<LocalSystem<S>> {
    let base = families::trivial_system::<S>(c.clone(), 2, field).unwrap();
    (0..count)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = families::random_gauge::<S>(c.len(), 2, &mut rng, !S::EXACT);
            base.regauge(&g).unwrap()
        })
        .collect()
}

fn torsions<S: Scalar>(mode: Parallelism, systems: &[LocalSystem<S>]) -> Vec<S> {
    mode.map_slice(systems, |s| Twisted::new(s.clone(), 1e-9).and_then(|t| t.t_unit()).unwrap())
}

fn bench_batches(c: &mut Criterion) {
    let torus = Arc::new(families::torus2().unwrap());
    let sphere = Arc::new(families::sphere(3).unwrap());
    let float_batch = batch::<C64>(&torus, Field::Complex, 32);
    let exact_batch = batch::<Q>(&sphere, Field::Real, 16);

    let mut group = c.benchmark_group("torsion batch");
    for mode in [Parallelism::Sequential, Parallelism::Parallel] {
        group.bench_with_input(BenchmarkId::new("torus2 f64", format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| black_box(torsions(m, &float_batch)))
        });
        group.bench_with_input(BenchmarkId::new("sphere3 exact", format!("{mode:?}")), &mode, |b, &m| {
            b.iter(|| black_box(torsions(m, &exact_batch)))
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_batches
}
criterion_main!(benches);
