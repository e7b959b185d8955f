//! Conductance random walks observed at integer times.
//!
//! The trace walk runs the continuous-time walk with jump rate
//! `rate * w(x, y)` through each segment of a schedule and records the
//! position once per unit of time. With one transition-kernel segment of rate
//! `λ` this is `J ~ Poisson(λ)` kernel jumps per step. The jump chain makes
//! exactly one kernel jump per step.

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::error::Result;
use crate::graph::{FiniteGraph, Point, Site};
use crate::kernel::{EdgeWeights, Kernel, SharedKernel};
use crate::rng;
use crate::schedule::Schedule;
use crate::stats::{run_blocks, Estimate, RunningStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkMode {
    Trace,
    JumpChain,
}

#[derive(Clone, Debug)]
pub struct TraceWalk<S: Site> {
    schedule: Schedule<S>,
    mode: WalkMode,
}

impl<S: Site> TraceWalk<S> {
    /// Transition kernel `p` run at rate `λ`: one step is `e^{λ(p - Id)}`.
    pub fn new(kernel: impl Kernel<S> + 'static, lambda: f64) -> Result<Self> {
        Ok(Self::scheduled(Schedule::homogeneous(kernel, lambda)?))
    }

    pub fn shared(kernel: SharedKernel<S>, lambda: f64) -> Result<Self> {
        Ok(Self::scheduled(Schedule::homogeneous_shared(kernel, lambda)?))
    }

    /// Conductances `c`: the walk leaves `x` at rate `c(x)`.
    pub fn conductance(kernel: impl Kernel<S> + 'static) -> Result<Self> {
        Self::new(kernel, 1.0)
    }

    /// One unit step is the product of the segment kernels, in order.
    pub fn scheduled(schedule: Schedule<S>) -> Self {
        TraceWalk {
            schedule,
            mode: WalkMode::Trace,
        }
    }

    /// Discrete walk `x → y` with probability `w(x, y) / w(x)`.
    pub fn jump_chain(kernel: impl Kernel<S> + 'static) -> Result<Self> {
        Ok(TraceWalk {
            schedule: Schedule::homogeneous(kernel, 1.0)?,
            mode: WalkMode::JumpChain,
        })
    }

    pub fn schedule(&self) -> &Schedule<S> {
        &self.schedule
    }

    pub fn mode(&self) -> WalkMode {
        self.mode
    }

    /// One unit of time from `x`.
    pub fn step<R: Rng>(&self, mut x: S, rng: &mut R) -> S {
        if self.mode == WalkMode::JumpChain {
            let k = &self.schedule.segments()[0].kernel;
            return k.sample_neighbor(x, rng.random()).unwrap_or(x);
        }
        for (i, seg) in self.schedule.segments().iter().enumerate() {
            let duration = self.schedule.window_duration(i as u64);
            let mut t = 0.0;
            loop {
                let exit = seg.rate * seg.kernel.total_mass(x);
                if exit <= 0.0 {
                    break;
                }
                t += -(1.0 - rng.random::<f64>()).ln() / exit;
                if t >= duration {
                    break;
                }
                x = seg.kernel.sample_neighbor(x, rng.random()).unwrap_or(x);
            }
        }
        x
    }

    pub fn step_seeded(&self, x: S, seed: u64) -> S {
        self.step(x, &mut rng::stream(seed))
    }

    /// First return time to the origin, `None` if it exceeds `n_max`.
    pub fn return_time<R: Rng>(&self, n_max: u64, rng: &mut R) -> Option<u64> {
        let origin = S::origin();
        let mut x = origin;
        for k in 1..=n_max {
            x = self.step(x, rng);
            if x == origin {
                return Some(k);
            }
        }
        None
    }

    /// Sites visited at integer times `0..=n`, sorted.
    pub fn range<R: Rng>(&self, n: u64, rng: &mut R) -> Vec<S> {
        let mut x = S::origin();
        let mut seen = vec![x];
        for _ in 0..n {
            x = self.step(x, rng);
            seen.push(x);
        }
        seen.sort_unstable();
        seen.dedup();
        seen
    }
}

/// Survival function of the return time `T = inf{n >= 1 : X_n = origin}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeEstimate {
    pub n_max: u64,
    /// `counts[k]` is the number of walks with `T = k` for `1 <= k <= n_max`;
    /// `counts[n_max + 1]` counts walks that had not returned by `n_max`.
    pub counts: Vec<u64>,
    pub samples: u64,
    pub seed: u64,
}

impl EscapeEstimate {
    /// `P̂(T > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        let k = k.min(self.n_max + 1) as usize;
        let alive: u64 = self.counts[k + 1..].iter().sum();
        alive as f64 / self.samples as f64
    }

    pub fn survival_stderr(&self, k: u64) -> f64 {
        let p = self.survival(k);
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }

    pub fn survival_curve(&self) -> Vec<f64> {
        (0..=self.n_max).map(|k| self.survival(k)).collect()
    }

    /// `Σ_{k=0}^{n} P̂(T > k)`, the sample mean of `min(T, n + 1)`.
    pub fn partial_sum(&self, n: u64) -> Estimate {
        assert!(n <= self.n_max, "partial sum past the horizon");
        let mut stats = RunningStats::new();
        let mut weighted = |value: f64, count: u64| {
            if count > 0 {
                let block = RunningStats::from_constant(value, count);
                stats.merge(&block);
            }
        };
        for (t, &c) in self.counts.iter().enumerate().skip(1) {
            weighted((t as u64).min(n + 1) as f64, c);
        }
        stats.estimate(self.seed)
    }

    /// `P̂(T > n_max) + σ·stderr`, an upper bracket for `P(T = ∞)`. The
    /// estimator itself is biased upwards, since late returns are missed.
    pub fn upper_bracket(&self, sigma: f64) -> f64 {
        self.survival(self.n_max) + sigma * self.survival_stderr(self.n_max)
    }
}

/// Runs `samples` independent walks from the origin up to `n_max` steps.
pub fn estimate_escape<S: Site>(walk: &TraceWalk<S>, n_max: u64, samples: u64, seed: u64) -> EscapeEstimate {
    assert!(n_max >= 1 && samples >= 1);
    let blocks = run_blocks(samples, |range| {
        let mut counts = vec![0u64; n_max as usize + 2];
        for i in range {
            let mut r = rng::stream(rng::sample_seed(seed, i));
            match walk.return_time(n_max, &mut r) {
                Some(t) => counts[t as usize] += 1,
                None => counts[n_max as usize + 1] += 1,
            }
        }
        counts
    });
    let mut counts = vec![0u64; n_max as usize + 2];
    for b in blocks {
        for (c, x) in counts.iter_mut().zip(b) {
            *c += x;
        }
    }
    EscapeEstimate {
        n_max,
        counts,
        samples,
        seed,
    }
}

/// `(1 - e^{-λ}) / R_eff`, a lower bound for the escape probability of the
/// trace walk of a transition kernel run at rate `λ`, where `R_eff` is the
/// resistance to infinity with conductances `p(x, y)`.
pub fn escape_lower_bound(lambda: f64, resistance: f64) -> f64 {
    (1.0 - (-lambda).exp()) / resistance
}

const SOLVER_TOLERANCE: f64 = 1e-10;

/// Effective resistance between the origin (held at voltage 1) and every site
/// outside `interior` (grounded), with conductances `c(x, y)`. Returns
/// `f64::INFINITY` when no grounded site is reachable from the origin.
pub fn effective_resistance<S: Site>(conductances: &dyn Kernel<S>, interior: impl Fn(&S) -> bool) -> f64 {
    let origin = S::origin();
    assert!(interior(&origin), "the origin must lie inside the domain");
    // index the interior sites reachable from the origin; the origin is not an unknown
    let mut index: FxHashMap<S, u32> = FxHashMap::default();
    let mut sites = Vec::new();
    let mut buf = Vec::new();
    let mut queue = vec![origin];
    let mut visited: rustc_hash::FxHashSet<S> = [origin].into_iter().collect();
    let mut grounded = false;
    while let Some(x) = queue.pop() {
        buf.clear();
        conductances.neighbors(x, &mut buf);
        for &(y, _) in &buf {
            if !interior(&y) {
                grounded = true;
            } else if visited.insert(y) {
                index.insert(y, sites.len() as u32);
                sites.push(y);
                queue.push(y);
            }
        }
    }
    if !grounded {
        return f64::INFINITY;
    }
    // rows of the reduced Laplacian: diag, off-diagonal entries, right-hand side
    let n = sites.len();
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let mut row_start = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (i, &x) in sites.iter().enumerate() {
        row_start.push(cols.len());
        buf.clear();
        conductances.neighbors(x, &mut buf);
        for &(y, c) in &buf {
            diag[i] += c;
            if y == origin {
                rhs[i] += c;
            } else if let Some(&j) = index.get(&y) {
                cols.push(j);
                vals.push(c);
            }
        }
    }
    row_start.push(cols.len());
    let apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut acc = diag[i] * v[i];
            for k in row_start[i]..row_start[i + 1] {
                acc -= vals[k] * v[cols[k] as usize];
            }
            out[i] = acc;
        }
    };
    let v = conjugate_gradient(n, apply, &diag, &rhs);
    buf.clear();
    conductances.neighbors(origin, &mut buf);
    let current: f64 = buf
        .iter()
        .map(|&(y, c)| {
            let vy = index.get(&y).map_or(0.0, |&j| v[j as usize]);
            c * (1.0 - vy)
        })
        .sum();
    if current > 0.0 {
        1.0 / current
    } else {
        f64::INFINITY
    }
}

/// Preconditioned conjugate gradient for a symmetric positive definite system.
fn conjugate_gradient(n: usize, apply: impl Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    if n == 0 {
        return x;
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        return x;
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..(20 * n + 1000) {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= SOLVER_TOLERANCE * norm_b {
            return x;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    log::warn!("conjugate gradient stopped before reaching tolerance {SOLVER_TOLERANCE}");
    x
}

/// Resistance from the origin of Z^D to the sites at Euclidean distance at
/// least `radius`.
pub fn lattice_resistance<const D: usize>(conductances: &dyn Kernel<Point<D>>, radius: f64) -> f64 {
    let r2 = radius * radius;
    effective_resistance(conductances, |x: &Point<D>| x.euclid_sq(&Point::ORIGIN) < r2)
}

/// Resistance from vertex 0 to the vertices at graph distance at least `radius`.
pub fn graph_resistance(conductances: &EdgeWeights, g: &FiniteGraph, radius: u32) -> f64 {
    let dist = g.distances_from(0);
    effective_resistance(conductances, |x: &u32| dist[*x as usize] < radius)
}

/// `2 R(2r) - R(r)`, the limit if `R(r) = R_∞ - c/r`. Reported for
/// orientation only.
pub fn richardson(r_small: f64, r_double: f64) -> f64 {
    2.0 * r_double - r_small
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recurrence {
    Transient,
    Recurrent,
    Inconclusive,
}

impl Recurrence {
    pub fn label(self) -> &'static str {
        match self {
            Recurrence::Transient => "TRANSIENT",
            Recurrence::Recurrent => "RECURRENT",
            Recurrence::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Decision thresholds for [`classify_recurrence`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierThresholds {
    /// Survival ratio between the top two horizons at or above which the
    /// survival curve counts as a plateau.
    pub plateau_ratio: f64,
    /// Survival at the top horizon must be at least this to call a plateau.
    pub survival_floor: f64,
    /// Ratio of successive resistance increments over doubling radii at or
    /// above which the resistance counts as growing without bound.
    pub growth_ratio: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        ClassifierThresholds {
            plateau_ratio: 0.9,
            survival_floor: 0.02,
            growth_ratio: 0.9,
        }
    }
}

/// A numerical diagnostic, not a proof.
#[derive(Clone, Debug, PartialEq)]
pub struct Classification {
    pub horizons: Vec<u64>,
    pub survival: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
    pub resistances: Vec<f64>,
    pub survival_ratio: f64,
    pub growth_ratio: f64,
    pub verdict: Recurrence,
}

impl Classification {
    pub fn summary(&self) -> String {
        let surv: Vec<String> = self
            .horizons
            .iter()
            .zip(&self.survival)
            .map(|(h, (p, se))| format!("P(T>{h})={p:.4}±{se:.4}"))
            .collect();
        let res: Vec<String> = self
            .radii
            .iter()
            .zip(&self.resistances)
            .map(|(r, x)| format!("R({r})={x:.5}"))
            .collect();
        format!(
            "{} (numerical diagnostic, not a proof): {}; {}; survival ratio {:.4}; increment ratio {:.4}",
            self.verdict.label(),
            surv.join(" "),
            res.join(" "),
            self.survival_ratio,
            self.growth_ratio
        )
    }
}

/// Combines the survival curve at increasing `horizons` with resistances at
/// increasing radii (at least three). A plateau of `P̂(T > h)` together with
/// shrinking resistance increments reads as transient; a decaying survival
/// curve together with non-shrinking increments reads as recurrent.
pub fn classify_recurrence<S: Site>(
    walk: &TraceWalk<S>,
    horizons: &[u64],
    samples: u64,
    seed: u64,
    radii: &[f64],
    resistances: &[f64],
    thresholds: ClassifierThresholds,
) -> Classification {
    assert!(horizons.len() >= 3 && horizons.windows(2).all(|w| w[0] < w[1]), "need three increasing horizons");
    assert!(radii.len() >= 3 && radii.len() == resistances.len(), "need three resistances");
    let top = *horizons.last().unwrap();
    let esc = estimate_escape(walk, top, samples, seed);
    let survival: Vec<(f64, f64)> = horizons
        .iter()
        .map(|&h| (esc.survival(h), esc.survival_stderr(h)))
        .collect();
    let m = survival.len();
    let survival_ratio = if survival[m - 2].0 > 0.0 {
        survival[m - 1].0 / survival[m - 2].0
    } else {
        0.0
    };
    let k = resistances.len();
    let (r1, r2, r3) = (resistances[k - 3], resistances[k - 2], resistances[k - 1]);
    let growth_ratio = if r3.is_infinite() || r2.is_infinite() {
        f64::INFINITY
    } else {
        (r3 - r2) / (r2 - r1)
    };
    let plateau = survival_ratio >= thresholds.plateau_ratio && survival[m - 1].0 >= thresholds.survival_floor;
    let growing = growth_ratio >= thresholds.growth_ratio;
    let verdict = match (plateau, growing) {
        (true, false) => Recurrence::Transient,
        (false, true) => Recurrence::Recurrent,
        _ => Recurrence::Inconclusive,
    };
    Classification {
        horizons: horizons.to_vec(),
        survival,
        radii: radii.to_vec(),
        resistances: resistances.to_vec(),
        survival_ratio,
        growth_ratio,
        verdict,
    }
}

/// [`classify_recurrence`] for a walk on Z^D, with resistances of the first
/// segment kernel at the given radii.
pub fn classify_lattice<const D: usize>(
    walk: &TraceWalk<Point<D>>,
    horizons: &[u64],
    samples: u64,
    seed: u64,
    radii: &[f64],
    thresholds: ClassifierThresholds,
) -> Classification {
    let kernel = walk.schedule().segments()[0].kernel.clone();
    let resistances: Vec<f64> = radii.iter().map(|&r| lattice_resistance(kernel.as_ref(), r)).collect();
    classify_recurrence(walk, horizons, samples, seed, radii, &resistances, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Edgeless, OffsetKernel};

    #[test]
    fn zero_rate_does_not_move() {
        let w = TraceWalk::new(OffsetKernel::<2>::nearest_neighbor().unwrap(), 0.0).unwrap();
        assert_eq!(w.step_seeded(Point([3, 4]), 9), Point([3, 4]));
    }

    #[test]
    fn two_vertex_parity() {
        let g = FiniteGraph::path(2);
        let c = 0.8;
        let w = TraceWalk::conductance(EdgeWeights::uniform(&g, c)).unwrap();
        let n = 100_000;
        let mut r = rng::stream(1);
        let moved = (0..n).filter(|_| w.step(0, &mut r) == 1).count();
        let p = (1.0 - (-2.0 * c).exp()) / 2.0;
        assert!((moved as f64 / n as f64 - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt());
    }

    #[test]
    fn frozen_walk_returns_immediately() {
        let w = TraceWalk::<Point<1>>::conductance(Edgeless).unwrap();
        let e = estimate_escape(&w, 5, 100, 0);
        assert_eq!(e.survival(0), 1.0);
        assert_eq!(e.survival(1), 0.0);
        assert_eq!(e.partial_sum(5).mean, 1.0);
    }

    #[test]
    fn survival_is_monotone() {
        let w = TraceWalk::new(OffsetKernel::<2>::nearest_neighbor().unwrap(), 1.0).unwrap();
        let e = estimate_escape(&w, 200, 3000, 4);
        let curve = e.survival_curve();
        assert_eq!(curve[0], 1.0);
        assert!(curve.windows(2).all(|p| p[0] >= p[1]));
        let direct: f64 = curve[..=60].iter().sum();
        assert!((e.partial_sum(60).mean - direct).abs() < 1e-9);
    }

    #[test]
    fn escape_is_independent_of_block_scheduling() {
        let w = TraceWalk::new(OffsetKernel::<3>::nearest_neighbor().unwrap(), 1.0).unwrap();
        let a = estimate_escape(&w, 50, 5000, 17);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| estimate_escape(&w, 50, 5000, 17));
        assert_eq!(a, b);
    }

    #[test]
    fn single_edge_resistance() {
        let g = FiniteGraph::path(2);
        let c = 2.5;
        let r = graph_resistance(&EdgeWeights::uniform(&g, c), &g, 1);
        assert!((r - 1.0 / c).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_resistance() {
        let k = OffsetKernel::<1>::unit_conductance().unwrap();
        for radius in [1.0, 5.0, 37.0] {
            let r = lattice_resistance(&k, radius);
            assert!((r - radius / 2.0).abs() < 1e-8, "R({radius}) = {r}");
        }
    }

    #[test]
    fn disconnected_origin_is_infinite() {
        let g = FiniteGraph::new(3, [(1, 2)]).unwrap();
        assert!(graph_resistance(&EdgeWeights::unit(&g), &g, 1).is_infinite());
        assert!(lattice_resistance::<2>(&Edgeless, 4.0).is_infinite());
    }

    #[test]
    fn resistance_grows_with_radius() {
        let k = OffsetKernel::<2>::nearest_neighbor().unwrap();
        let rs: Vec<f64> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r| lattice_resistance(&k, r)).collect();
        assert!(rs.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn range_at_time_zero() {
        let g = FiniteGraph::path(3);
        let w = TraceWalk::scheduled(Schedule::homogeneous(EdgeWeights::unit(&g), 1.0).unwrap());
        assert_eq!(w.mode(), WalkMode::Trace);
        let mut r = rng::stream(2);
        assert_eq!(w.range(0, &mut r), vec![0]);
    }
}
