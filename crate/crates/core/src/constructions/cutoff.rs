//! Unit-time stirring schedules whose increments move every site a bounded
//! distance.
//!
//! On Z^d the nearest-neighbour edges split into edges inside the cubes
//! `2n + {0,1}^d` and the rest. Running the first class, then the second,
//! then the first again, each for a third of the unit, keeps every particle
//! inside one cube per third, and the palindromic order makes the unit kernel
//! symmetric. On a finite graph the edges are split into matchings and the
//! matchings are run in palindromic order.

use std::sync::Arc;

use num_rational::Ratio;

use crate::error::Result;
use crate::graph::{FiniteGraph, Point};
use crate::kernel::{cube_edge_partition, EdgeWeights, Edgeless, SharedKernel};
use crate::matching::{greedy_matching_decomposition, MatchingDecomposition};
use crate::oracle::exact_particle_kernel;
use crate::rng;
use crate::schedule::{Instant, Schedule, Segment};
use crate::stats::run_blocks;
use crate::stirring::{with_store, RingStore};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeMetric {
    Graph,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CutoffSource {
    ZdCubes { d: usize },
    GraphMatchings { h: usize, classes: usize },
}

#[derive(Clone, Debug)]
pub struct CutoffSchedule<S: crate::graph::Site> {
    pub schedule: Schedule<S>,
    /// The bound that is asserted, in `metric`.
    pub range_bound: u64,
    pub metric: RangeMetric,
    /// Bound in graph distance, also recorded for lattices.
    pub graph_bound: u64,
    pub source: CutoffSource,
}

/// Smallest integer `r` with `r >= 3 sqrt(d)`, computed without floating point.
pub fn cube_range(d: usize) -> u64 {
    let target = 9 * d as u64;
    (0..).find(|r| r * r >= target).unwrap()
}

/// `(p1, 1/3), (p2, 1/3), (p1, 1/3)` with the cube partition of Z^D.
pub fn build_zd_cutoff<const D: usize>() -> Result<CutoffSchedule<Point<D>>> {
    let (p1, p2) = cube_edge_partition::<D>()?;
    let p1: SharedKernel<Point<D>> = Arc::new(p1);
    let p2: SharedKernel<Point<D>> = Arc::new(p2);
    let third = Ratio::new(1, 3);
    let schedule = Schedule::new(vec![
        Segment { kernel: p1.clone(), rate: 1.0, duration: third },
        Segment { kernel: p2, rate: 1.0, duration: third },
        Segment { kernel: p1, rate: 1.0, duration: third },
    ])?;
    Ok(CutoffSchedule {
        schedule,
        range_bound: cube_range(D),
        metric: RangeMetric::Euclidean,
        graph_bound: 3 * D as u64,
        source: CutoffSource::ZdCubes { d: D },
    })
}

/// Palindromic matching schedule `L_1, …, L_N, L_N, …, L_1`, each segment of
/// length `1/(2N)` with unit conductance on the matching edges.
pub fn build_graph_cutoff(g: &FiniteGraph) -> Result<(CutoffSchedule<u32>, MatchingDecomposition)> {
    g.require_connected()?;
    let dec = greedy_matching_decomposition(g);
    let n = g.vertex_count();
    let h = g.max_degree().max(1);
    let classes = dec.class_count();
    let schedule = if classes == 0 {
        Schedule::homogeneous(Edgeless, 1.0)?
    } else {
        let dur = Ratio::new(1, 2 * classes as u32);
        let kernels: Vec<SharedKernel<u32>> = dec
            .classes
            .iter()
            .enumerate()
            .map(|(k, c)| Arc::new(EdgeWeights::on_edges(n, c, format!("matching-{}", k + 1))) as SharedKernel<u32>)
            .collect();
        let segments = kernels
            .iter()
            .chain(kernels.iter().rev())
            .map(|k| Segment { kernel: k.clone(), rate: 1.0, duration: dur })
            .collect();
        Schedule::new(segments)?
    };
    let bound = 4 * h as u64 - 2;
    Ok((
        CutoffSchedule {
            schedule,
            range_bound: bound,
            metric: RangeMetric::Graph,
            graph_bound: bound,
            source: CutoffSource::GraphMatchings { h, classes },
        },
        dec,
    ))
}

/// Outcome of sampling unit increments of a cutoff schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffReport {
    pub samples: u64,
    pub range_bound: u64,
    pub metric: RangeMetric,
    pub max_range_graph: u64,
    pub max_range_euclidean: f64,
    pub range_violations: u64,
    /// Lattice only: particles that left their cube during some third.
    pub confinement_violations: u64,
    pub bijection_failures: u64,
    /// Smallest empirical neighbour conductance `(mean, stderr)` over the
    /// monitored neighbour pairs.
    pub min_conductance: Option<(f64, f64)>,
    /// `max |P(x, y) - P(y, x)|` of the exact unit kernel, when computed.
    pub symmetry_error: Option<f64>,
}

impl CutoffReport {
    fn empty(bound: u64, metric: RangeMetric) -> Self {
        CutoffReport {
            samples: 0,
            range_bound: bound,
            metric,
            max_range_graph: 0,
            max_range_euclidean: 0.0,
            range_violations: 0,
            confinement_violations: 0,
            bijection_failures: 0,
            min_conductance: None,
            symmetry_error: None,
        }
    }

    /// Neighbour conductance is bounded away from zero at `sigma` standard errors.
    pub fn conductance_positive(&self, sigma: f64) -> bool {
        self.min_conductance.is_none_or(|(m, se)| m - sigma * se > 0.0)
    }

    pub fn passed(&self, sigma: f64, symmetry_tolerance: f64) -> bool {
        self.range_violations == 0
            && self.confinement_violations == 0
            && self.bijection_failures == 0
            && self.conductance_positive(sigma)
            && self.symmetry_error.is_none_or(|e| e <= symmetry_tolerance)
    }
}

#[derive(Clone, Default)]
struct Tally {
    max_graph: u64,
    max_euclid: f64,
    range_violations: u64,
    confinement: u64,
    bijection: u64,
    pair_hits: Vec<u64>,
}

impl Tally {
    fn merge(&mut self, o: Tally) {
        self.max_graph = self.max_graph.max(o.max_graph);
        self.max_euclid = self.max_euclid.max(o.max_euclid);
        self.range_violations += o.range_violations;
        self.confinement += o.confinement;
        self.bijection += o.bijection;
        if self.pair_hits.is_empty() {
            self.pair_hits = o.pair_hits;
        } else {
            for (a, b) in self.pair_hits.iter_mut().zip(o.pair_hits) {
                *a += b;
            }
        }
    }
}

fn min_conductance(hits: &[u64], samples: u64) -> Option<(f64, f64)> {
    let c = *hits.iter().min()?;
    let p = c as f64 / samples as f64;
    Some((p, (p * (1.0 - p) / samples as f64).sqrt()))
}

/// Samples `τ_1` on the window `[-half_width, half_width)^D` of Z^D. Traces
/// are exact on the infinite lattice; the window only limits which sites are
/// inspected. `half_width` should be at least `3r/2` so the window side is at
/// least three times the range bound.
pub fn verify_zd_cutoff<const D: usize>(
    cutoff: &CutoffSchedule<Point<D>>,
    half_width: i64,
    samples: u64,
    seed: u64,
) -> CutoffReport {
    let mut report = CutoffReport::empty(cutoff.range_bound, cutoff.metric);
    if samples == 0 {
        return report;
    }
    let side = (2 * half_width) as usize;
    let sites: Vec<Point<D>> = (0..side.pow(D as u32))
        .map(|mut i| {
            let mut c = [0i64; D];
            for slot in c.iter_mut() {
                *slot = (i % side) as i64 - half_width;
                i /= side;
            }
            Point(c)
        })
        .collect();
    // neighbour pairs inside the window, as (site index, axis)
    let pairs: Vec<(usize, Point<D>)> = sites
        .iter()
        .enumerate()
        .flat_map(|(i, x)| {
            (0..D).filter_map(move |axis| {
                let mut o = [0; D];
                o[axis] = 1;
                let y = x.shift(&o);
                (y.0[axis] < half_width).then_some((i, y))
            })
        })
        .collect();
    let schedule = &cutoff.schedule;
    let bound = cutoff.range_bound as f64;
    let segs = schedule.period_len();
    let cube_of = |p: &Point<D>, shift: i64| -> [i64; D] {
        let mut c = [0; D];
        for i in 0..D {
            c[i] = (p.0[i] - shift).div_euclid(2);
        }
        c
    };
    let confine = matches!(cutoff.source, CutoffSource::ZdCubes { .. });
    let blocks = run_blocks(samples, |range| {
        let mut tally = Tally {
            pair_hits: vec![0; pairs.len()],
            ..Tally::default()
        };
        let mut images = Vec::with_capacity(sites.len());
        for i in range {
            let ((), _) = with_store(schedule, rng::sample_seed(seed, i), |store: &mut RingStore<'_, Point<D>>| {
                images.clear();
                let mut confinement = 0;
                for x in &sites {
                    let mut at = *x;
                    for w in 0..segs {
                        let next = store.forward_trace(
                            at,
                            Instant { window: w, offset: f64::NEG_INFINITY },
                            Instant { window: w, offset: f64::INFINITY },
                        )?;
                        // first and third thirds run inside the even cubes, the middle one inside the odd cubes
                        if confine && cube_of(&at, (w % 2) as i64) != cube_of(&next, (w % 2) as i64) {
                            confinement += 1;
                        }
                        at = next;
                    }
                    images.push(at);
                }
                tally.confinement += confinement;
                Ok(())
            });
            for (x, y) in sites.iter().zip(&images) {
                let g = x.l1(y);
                let e = x.euclid(y);
                tally.max_graph = tally.max_graph.max(g);
                tally.max_euclid = tally.max_euclid.max(e);
                let over = match cutoff.metric {
                    RangeMetric::Euclidean => e > bound,
                    RangeMetric::Graph => g > cutoff.range_bound,
                };
                if over {
                    tally.range_violations += 1;
                }
            }
            let mut sorted = images.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|p| p[0] == p[1]) {
                tally.bijection += 1;
            }
            for (k, &(xi, y)) in pairs.iter().enumerate() {
                let x = sites[xi];
                let yi = y.0.iter().rev().fold(0usize, |acc, &c| acc * side + (c + half_width) as usize);
                if images[xi] == y || images[yi] == x {
                    tally.pair_hits[k] += 1;
                }
            }
        }
        tally
    });
    let mut total = Tally::default();
    for b in blocks {
        total.merge(b);
    }
    report.samples = samples;
    report.max_range_graph = total.max_graph;
    report.max_range_euclidean = total.max_euclid;
    report.range_violations = total.range_violations;
    report.confinement_violations = total.confinement;
    report.bijection_failures = total.bijection;
    report.min_conductance = min_conductance(&total.pair_hits, samples);
    report
}

/// Samples `τ_1` on a finite graph. For graphs with at most six vertices the
/// exact unit kernel is also checked for symmetry.
pub fn verify_graph_cutoff(cutoff: &CutoffSchedule<u32>, g: &FiniteGraph, samples: u64, seed: u64) -> CutoffReport {
    let mut report = CutoffReport::empty(cutoff.range_bound, cutoff.metric);
    let n = g.vertex_count();
    if n <= 6 {
        let k = exact_particle_kernel(n, &cutoff.schedule, 1.0);
        let mut err: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                err = err.max((k[x][y] - k[y][x]).abs());
            }
        }
        report.symmetry_error = Some(err);
    }
    if samples == 0 {
        return report;
    }
    let dist = g.distance_matrix();
    let edges = g.edges();
    let schedule = &cutoff.schedule;
    let at = schedule.locate(1.0);
    let blocks = run_blocks(samples, |range| {
        let mut tally = Tally {
            pair_hits: vec![0; edges.len()],
            ..Tally::default()
        };
        for i in range {
            let (tau, _) = with_store(schedule, rng::sample_seed(seed, i), |s| s.forward_permutation(n, at));
            let mut seen = vec![false; n];
            let mut bijective = true;
            for (x, &y) in tau.iter().enumerate() {
                if std::mem::replace(&mut seen[y as usize], true) {
                    bijective = false;
                }
                let d = dist[x][y as usize] as u64;
                tally.max_graph = tally.max_graph.max(d);
                if d > cutoff.range_bound {
                    tally.range_violations += 1;
                }
            }
            if !bijective {
                tally.bijection += 1;
            }
            for (k, &(u, v)) in edges.iter().enumerate() {
                if tau[u as usize] == v || tau[v as usize] == u {
                    tally.pair_hits[k] += 1;
                }
            }
        }
        tally
    });
    let mut total = Tally::default();
    for b in blocks {
        total.merge(b);
    }
    report.samples = samples;
    report.max_range_graph = total.max_graph;
    report.max_range_euclidean = total.max_graph as f64;
    report.range_violations = total.range_violations;
    report.bijection_failures = total.bijection;
    report.min_conductance = min_conductance(&total.pair_hits, samples);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_ranges() {
        assert_eq!(cube_range(1), 3);
        assert_eq!(cube_range(2), 5);
        assert_eq!(cube_range(3), 6);
        assert_eq!(cube_range(4), 6);
        let c = build_zd_cutoff::<3>().unwrap();
        assert_eq!(c.range_bound, 6);
        assert_eq!(c.graph_bound, 9);
        assert!(c.schedule.is_palindromic());
    }

    #[test]
    fn single_edge_cutoff() {
        let g = FiniteGraph::path(2);
        let (c, dec) = build_graph_cutoff(&g).unwrap();
        assert_eq!(dec.class_count(), 1);
        assert_eq!(c.range_bound, 2);
        let r = verify_graph_cutoff(&c, &g, 2000, 1);
        assert_eq!(r.range_violations, 0);
        assert_eq!(r.max_range_graph, 1);
        assert!(r.symmetry_error.unwrap() < 1e-12);
    }

    #[test]
    fn triangle_cutoff() {
        let g = FiniteGraph::cycle(3);
        let (c, dec) = build_graph_cutoff(&g).unwrap();
        assert_eq!(dec.class_count(), 3);
        assert_eq!(c.range_bound, 6);
        assert_eq!(c.schedule.segments().len(), 6);
    }

    #[test]
    fn five_path_kernel_symmetric() {
        let g = FiniteGraph::path(5);
        let (c, _) = build_graph_cutoff(&g).unwrap();
        let r = verify_graph_cutoff(&c, &g, 0, 0);
        assert_eq!(r.samples, 0);
        assert!(r.min_conductance.is_none());
        assert!(r.symmetry_error.unwrap() < 1e-12);
    }

    #[test]
    fn zero_samples_report_is_empty() {
        let c = build_zd_cutoff::<2>().unwrap();
        let r = verify_zd_cutoff(&c, 8, 0, 0);
        assert_eq!(r, CutoffReport::empty(5, RangeMetric::Euclidean));
        assert!(r.passed(3.0, 1e-12));
    }

    #[test]
    fn small_lattice_run() {
        let c = build_zd_cutoff::<2>().unwrap();
        let r = verify_zd_cutoff(&c, 8, 300, 3);
        assert_eq!(r.range_violations, 0);
        assert_eq!(r.confinement_violations, 0);
        assert_eq!(r.bijection_failures, 0);
        assert!(r.max_range_euclidean <= 5.0);
        assert!(r.conductance_positive(3.0), "{:?}", r.min_conductance);
    }
}
