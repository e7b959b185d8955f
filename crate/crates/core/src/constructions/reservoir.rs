//! The lattice coupled to a complete graph `K_N` attached at the origin.
//!
//! Time alternates between shuffles `J_k = [k + k/N, k + (k+1)/N)` for
//! `k = 0..=n`, during which each of the `N` edges between the origin and
//! `K_N` rings at rate `N`, and lattice intervals `I_k` of unit length in
//! between, during which the lattice stirs exactly as the plain process does
//! on `[k - 1, k)`. The run ends at `n̂ = n(1 + 1/N) + 1/N`.
//!
//! Only the `N/2 - 1` marked particles are tracked. Their lattice motion uses
//! the same ring store as the inverted orbit of the origin, so both outputs of
//! a sample come from one realization.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::graph::Site;
use crate::rng;
use crate::schedule::{Instant, Schedule};
use crate::stats::{run_blocks, Estimate, RunningStats};
use crate::stirring::with_store;

const SHUFFLE_DOMAIN: u64 = 0x4b4e_5348_5546;

#[derive(Clone, Debug)]
pub struct ReservoirConfig<S: Site> {
    /// Size `N` of the complete graph, even and at least 4.
    pub reservoir: usize,
    pub horizon: u64,
    /// The lattice dynamics, one unit of time per lattice interval.
    pub lattice: Schedule<S>,
}

impl<S: Site> ReservoirConfig<S> {
    pub fn new(reservoir: usize, horizon: u64, lattice: Schedule<S>) -> Result<Self> {
        if reservoir < 4 || reservoir % 2 != 0 {
            return Err(Error::invalid("N", format!("must be even and at least 4, got {reservoir}")));
        }
        Ok(ReservoirConfig { reservoir, horizon, lattice })
    }

    pub fn marked(&self) -> usize {
        self.reservoir / 2 - 1
    }

    /// `n̂ = n(1 + 1/N) + 1/N`, the end of the last shuffle.
    pub fn end_time(&self) -> f64 {
        let n = self.horizon as f64;
        let inv = 1.0 / self.reservoir as f64;
        n * (1.0 + inv) + inv
    }

    /// Probability that a shuffle interval sees at least one ring, `1 - e^{-N}`.
    pub fn p_update(&self) -> f64 {
        -(-(self.reservoir as f64)).exp_m1()
    }

    /// `(1/N)(1 - e^{-N})(1 - 1/N)`, the lower bound on the chance that a
    /// given reservoir vertex is sent to the origin by one shuffle.
    pub fn p_marked_bound(&self) -> f64 {
        let n = self.reservoir as f64;
        self.p_update() * (1.0 - 1.0 / n) / n
    }

    /// Exact `p_marked`: `1/N` times the chance that the origin's content at
    /// the start of a shuffle is elsewhere at its end. After `j` rings that
    /// content is at the origin with probability
    /// `1/(N+1) + N/(N+1) (-1/N)^j`; averaging over `j ~ Poisson(N)` gives
    /// `(1 - e^{-(N+1)}) / (N+1)`.
    pub fn p_marked(&self) -> f64 {
        let m = self.reservoir as f64 + 1.0;
        -(-m).exp_m1() / m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReservoirSample {
    /// No marked particle on the lattice at `n̂`.
    pub empty: bool,
    /// `|O_n|` from the same lattice rings.
    pub orbit_size: usize,
    pub shuffles: u32,
    pub shuffles_with_update: u32,
    /// Shuffles at whose end the origin no longer holds its initial content.
    pub origin_replaced: u32,
    /// Marked particles were neither created nor lost.
    pub conserved: bool,
}

pub fn sample_reservoir<S: Site>(cfg: &ReservoirConfig<S>, seed: u64) -> ReservoirSample {
    let n_res = cfg.reservoir;
    let marked = cfg.marked();
    let origin = S::origin();
    let schedule = &cfg.lattice;
    let rings = Poisson::new(n_res as f64).expect("positive mean");
    with_store(schedule, seed, |store| {
        let mut shuffle_rng = rng::stream(rng::derive(store.seed(), SHUFFLE_DOMAIN));
        let mut reservoir = vec![false; n_res];
        reservoir[..marked].fill(true);
        let mut in_reservoir = marked;
        let mut lattice: Vec<S> = Vec::new();
        let mut sample = ReservoirSample {
            empty: true,
            orbit_size: 0,
            shuffles: 0,
            shuffles_with_update: 0,
            origin_replaced: 0,
            conserved: true,
        };
        for k in 0..=cfg.horizon {
            // J_k: N edges at rate N for time 1/N, so Poisson(N) rings, each on a uniform edge
            let count = rings.sample(&mut shuffle_rng) as u64;
            sample.shuffles += 1;
            if count > 0 {
                sample.shuffles_with_update += 1;
            }
            let mut at_origin = lattice.iter().position(|&x| x == origin);
            // where the origin's initial content is: 0 for the origin, v + 1 for reservoir vertex v
            let mut home = 0;
            for _ in 0..count {
                let v = shuffle_rng.random_range(0..n_res);
                if home == 0 {
                    home = v + 1;
                } else if home == v + 1 {
                    home = 0;
                }
                match (at_origin, reservoir[v]) {
                    (Some(i), false) => {
                        lattice.swap_remove(i);
                        reservoir[v] = true;
                        in_reservoir += 1;
                        at_origin = None;
                    }
                    (None, true) => {
                        reservoir[v] = false;
                        in_reservoir -= 1;
                        lattice.push(origin);
                        at_origin = Some(lattice.len() - 1);
                    }
                    _ => {}
                }
            }
            if home != 0 {
                sample.origin_replaced += 1;
            }
            if in_reservoir + lattice.len() != marked {
                sample.conserved = false;
            }
            // I_{k+1}: the lattice runs through its own unit interval [k, k + 1)
            if k < cfg.horizon {
                let from = Instant {
                    window: schedule.integer_window(k),
                    offset: f64::NEG_INFINITY,
                };
                let to = Instant {
                    window: schedule.integer_window(k + 1) - 1,
                    offset: f64::INFINITY,
                };
                for x in lattice.iter_mut() {
                    *x = store.forward_trace(*x, from, to)?;
                }
            }
        }
        sample.empty = lattice.is_empty();
        sample.orbit_size = *store.discrete_orbit_sizes(origin, cfg.horizon)?.last().unwrap();
        Ok(sample)
    })
    .0
}

/// Paired estimates of `P(A_{n̂} = ∅)` and `E[(1/2)^{|O_n|}]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub reservoir: usize,
    pub horizon: u64,
    pub samples: u64,
    pub p_empty: Estimate,
    pub orbit_pgf: Estimate,
    /// Per-sample `1{A = ∅} - (1/2)^{|O_n|}`.
    pub difference: Estimate,
    pub shuffles: u64,
    pub shuffles_with_update: u64,
    pub origin_replaced: u64,
    pub conservation_failures: u64,
    pub p_update: f64,
    pub p_marked: f64,
    pub p_marked_bound: f64,
}

impl SandwichReport {
    pub fn p_update_empirical(&self) -> f64 {
        self.shuffles_with_update as f64 / self.shuffles as f64
    }

    /// `origin_replaced / (N · shuffles)` with its binomial standard error.
    pub fn p_marked_empirical(&self) -> (f64, f64) {
        let m = self.shuffles as f64;
        let q = self.origin_replaced as f64 / m;
        let n = self.reservoir as f64;
        (q / n, (q * (1.0 - q) / m).sqrt() / n)
    }

    /// Empirical update frequency within `sigma` binomial standard errors of
    /// `1 - e^{-N}` (standard errors from the expected value, with a
    /// continuity correction of half a count).
    pub fn p_update_matches(&self, sigma: f64) -> bool {
        let q = self.p_update;
        let m = self.shuffles as f64;
        let tol = sigma * (q * (1.0 - q) / m).sqrt() + 0.5 / m;
        (self.p_update_empirical() - q).abs() <= tol
    }
}

pub fn verify_sandwich<S: Site>(cfg: &ReservoirConfig<S>, samples: u64, seed: u64) -> SandwichReport {
    let blocks = run_blocks(samples, |range| {
        let mut empty = RunningStats::new();
        let mut pgf = RunningStats::new();
        let mut diff = RunningStats::new();
        let (mut shuffles, mut updates, mut replaced, mut broken) = (0u64, 0u64, 0u64, 0u64);
        for i in range {
            let s = sample_reservoir(cfg, rng::sample_seed(seed, i));
            let a = if s.empty { 1.0 } else { 0.0 };
            let b = 0.5f64.powi(s.orbit_size as i32);
            empty.push(a);
            pgf.push(b);
            diff.push(a - b);
            shuffles += s.shuffles as u64;
            updates += s.shuffles_with_update as u64;
            replaced += s.origin_replaced as u64;
            broken += (!s.conserved) as u64;
        }
        (empty, pgf, diff, shuffles, updates, replaced, broken)
    });
    let mut empty = RunningStats::new();
    let mut pgf = RunningStats::new();
    let mut diff = RunningStats::new();
    let (mut shuffles, mut updates, mut replaced, mut broken) = (0, 0, 0, 0);
    for (e, p, d, s, u, r, b) in &blocks {
        empty.merge(e);
        pgf.merge(p);
        diff.merge(d);
        shuffles += s;
        updates += u;
        replaced += r;
        broken += b;
    }
    SandwichReport {
        reservoir: cfg.reservoir,
        horizon: cfg.horizon,
        samples,
        p_empty: empty.estimate(seed),
        orbit_pgf: pgf.estimate(seed),
        difference: diff.estimate(seed),
        shuffles,
        shuffles_with_update: updates,
        origin_replaced: replaced,
        conservation_failures: broken,
        p_update: cfg.p_update(),
        p_marked: cfg.p_marked(),
        p_marked_bound: cfg.p_marked_bound(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Point;
    use crate::kernel::{Edgeless, OffsetKernel};

    #[test]
    fn end_time_arithmetic() {
        let s = Schedule::<Point<1>>::homogeneous(Edgeless, 1.0).unwrap();
        let cfg = ReservoirConfig::new(10, 3, s).unwrap();
        assert!((cfg.end_time() - 3.4).abs() < 1e-12);
        assert_eq!(cfg.marked(), 4);
        assert!(ReservoirConfig::new(7, 3, cfg.lattice.clone()).is_err());
        assert!(ReservoirConfig::new(2, 3, cfg.lattice.clone()).is_err());
    }

    #[test]
    fn edgeless_lattice() {
        let s = Schedule::<Point<3>>::homogeneous(Edgeless, 1.0).unwrap();
        let cfg = ReservoirConfig::new(16, 4, s).unwrap();
        let r = verify_sandwich(&cfg, 20_000, 5);
        assert_eq!(r.orbit_pgf.mean, 0.5);
        assert_eq!(r.orbit_pgf.stderr, 0.0);
        assert!(r.p_empty.mean >= 0.5 - 3.0 * r.p_empty.stderr);
        assert_eq!(r.conservation_failures, 0);
    }

    #[test]
    fn single_shuffle_leaves_origin_empty_about_half_the_time() {
        // after the last ring the origin holds the content of a uniform
        // reservoir vertex, which is empty with probability (N/2 + 1)/N
        let k = OffsetKernel::<3>::nearest_neighbor().unwrap();
        let s = Schedule::homogeneous(k, 1.0).unwrap();
        let n_res = 64;
        let cfg = ReservoirConfig::new(n_res, 0, s).unwrap();
        let r = verify_sandwich(&cfg, 40_000, 9);
        let expected = (n_res as f64 / 2.0 + 1.0) / n_res as f64;
        assert!((r.p_empty.mean - expected).abs() < 3.0 * r.p_empty.stderr);
    }

    #[test]
    fn p_marked_matches_exact_value_and_bound() {
        let s = Schedule::<Point<1>>::homogeneous(Edgeless, 1.0).unwrap();
        for n_res in [4, 8, 16, 64] {
            let cfg = ReservoirConfig::new(n_res, 5, s.clone()).unwrap();
            let r = verify_sandwich(&cfg, 20_000, n_res as u64);
            let (q, se) = r.p_marked_empirical();
            assert!((q - r.p_marked).abs() < 3.0 * se, "N={n_res}: {q} vs {}", r.p_marked);
            assert!(r.p_marked >= r.p_marked_bound);
        }
        // series over the number of rings, a_{j+1} = (1 - a_j)/N
        let cfg = ReservoirConfig::new(4, 0, s).unwrap();
        let n = 4.0f64;
        let (mut a, mut pmf, mut stay) = (1.0, (-n).exp(), 0.0);
        for j in 0..200 {
            stay += pmf * a;
            a = (1.0 - a) / n;
            pmf *= n / (j + 1) as f64;
        }
        assert!((cfg.p_marked() - (1.0 - stay) / n).abs() < 1e-15);
    }

    #[test]
    fn particles_are_conserved() {
        let k = OffsetKernel::<2>::nearest_neighbor().unwrap();
        let s = Schedule::homogeneous(k, 2.0).unwrap();
        let cfg = ReservoirConfig::new(8, 6, s).unwrap();
        let r = verify_sandwich(&cfg, 5000, 2);
        assert_eq!(r.conservation_failures, 0);
        assert_eq!(r.shuffles, 5000 * 7);
    }
}
