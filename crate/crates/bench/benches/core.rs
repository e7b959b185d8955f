use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use stir_bench::{bounded_degree, cycle, lattice, long_range};
use stir_core::{
    estimate_escape, exact_orbit_pgf, exact_unit_distribution, greedy_matching_decomposition, rng, OffsetKernel, Point,
    RingStore, TraceWalk,
};

fn orbits(c: &mut Criterion) {
    let mut g = c.benchmark_group("orbit");
    let z3 = lattice::<3>();
    let mut i = 0u64;
    g.bench_function("z3 sizes n=14", |b| {
        let mut store = RingStore::new(&z3, 0);
        b.iter(|| {
            i += 1;
            store.reset(rng::sample_seed(1, i));
            black_box(store.discrete_orbit_sizes(Point::ORIGIN, 14).unwrap())
        })
    });
    let z2 = lattice::<2>();
    g.bench_function("z2 sizes n=200", |b| {
        let mut store = RingStore::new(&z2, 0);
        b.iter(|| {
            i += 1;
            store.reset(rng::sample_seed(2, i));
            black_box(store.discrete_orbit_sizes(Point::ORIGIN, 200).unwrap())
        })
    });
    let lr = long_range(1.5);
    g.bench_function("long-range alpha=1.5 sizes n=100", |b| {
        let mut store = RingStore::new(&lr, 0);
        b.iter(|| {
            i += 1;
            store.reset(rng::sample_seed(3, i));
            black_box(store.discrete_orbit_sizes(Point::ORIGIN, 100).unwrap())
        })
    });
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    let c5 = cycle(5);
    g.bench_function("unit distribution, 5-cycle", |b| b.iter(|| black_box(exact_unit_distribution(5, &c5).unwrap())));
    let c4 = cycle(4);
    g.bench_function("orbit pgf, 4-cycle n=4", |b| b.iter(|| black_box(exact_orbit_pgf(4, &c4, 4, 0.5).unwrap())));
    g.finish();
}

fn matching(c: &mut Criterion) {
    let mut g = c.benchmark_group("matching");
    g.bench_function("greedy, 3000 vertices h=6", |b| {
        b.iter_batched(
            || bounded_degree(3000, 6, 7),
            |graph| black_box(greedy_matching_decomposition(&graph)),
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn walks(c: &mut Criterion) {
    let mut g = c.benchmark_group("walk");
    g.sample_size(10);
    let walk = TraceWalk::new(OffsetKernel::<3>::nearest_neighbor().unwrap(), 1.0).unwrap();
    g.bench_function("z3 escape, 100 walks to 1000", |b| b.iter(|| black_box(estimate_escape(&walk, 1000, 100, 5))));
    g.finish();
}

criterion_group!(benches, orbits, oracle, matching, walks);
criterion_main!(benches);
