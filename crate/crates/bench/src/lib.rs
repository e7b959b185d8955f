//! Fixtures shared by the benchmarks.

use stir_core::{rng, EdgeWeights, FiniteGraph, OffsetKernel, Point, Schedule};

pub fn lattice<const D: usize>() -> Schedule<Point<D>> {
    Schedule::homogeneous(OffsetKernel::<D>::nearest_neighbor().expect("D > 0"), 1.0).expect("valid rate")
}

pub fn long_range(alpha: f64) -> Schedule<Point<1>> {
    Schedule::homogeneous(OffsetKernel::<1>::long_range(alpha, 1e4).expect("valid kernel"), 1.0).expect("valid rate")
}

pub fn cycle(m: usize) -> Schedule<u32> {
    Schedule::homogeneous(EdgeWeights::unit(&FiniteGraph::cycle(m)), 1.0).expect("valid rate")
}

/// A connected graph with maximum degree `h` and about `n h / 2` edges.
pub fn bounded_degree(n: usize, h: usize, seed: u64) -> FiniteGraph {
    FiniteGraph::random_bounded_degree(n, h, n * h / 2, &mut rng::stream(seed))
}
