//! Exact laws on tiny graphs.
//!
//! Segment exponentials are computed by uniformization: with `Λ` the total
//! exit rate, `e^{tQ} = Σ_k Pois(Λt; k) (I + Q/Λ)^k`, truncated once the
//! remaining Poisson mass drops below `1e-14`. Long intervals are split into
//! chunks with `Λ·chunk <= 10` so `e^{-Λ·chunk}` never underflows.
//!
//! Permutations of `0..m` are stored as `τ[x] = τ(x)` and indexed by their
//! Lehmer code.

use crate::error::{Error, Result};
use crate::schedule::Schedule;

const TAIL: f64 = 1e-14;
const CHUNK_MASS: f64 = 10.0;
/// Largest vertex count for the permutation-space computations (7! = 5040 states).
pub const MAX_PERMUTATION_VERTICES: usize = 7;
/// Largest vertex count for the orbit dynamic program (5! * 2^5 = 3840 states).
pub const MAX_ORBIT_VERTICES: usize = 5;
pub const MAX_ORBIT_STEPS: u64 = 20;

fn factorial(m: usize) -> usize {
    (1..=m).product()
}

/// Lehmer-code rank of a permutation of `0..m`.
pub fn perm_index(p: &[u8]) -> usize {
    let m = p.len();
    let mut idx = 0;
    for i in 0..m {
        let smaller = p[i + 1..].iter().filter(|&&q| q < p[i]).count();
        idx = idx * (m - i) + smaller;
    }
    idx
}

/// Inverse of [`perm_index`].
pub fn perm_from_index(mut idx: usize, m: usize) -> Vec<u8> {
    let mut digits = vec![0usize; m];
    for i in (0..m).rev() {
        let base = m - i;
        digits[i] = idx % base;
        idx /= base;
    }
    let mut pool: Vec<u8> = (0..m as u8).collect();
    digits.into_iter().map(|d| pool.remove(d)).collect()
}

/// Edges `(x, y, rate)` with positive rate during a segment.
fn segment_rates(m: usize, schedule: &Schedule<u32>, seg: usize) -> Vec<(u32, u32, f64)> {
    let s = &schedule.segments()[seg];
    let mut buf = Vec::new();
    let mut out = Vec::new();
    for x in 0..m as u32 {
        buf.clear();
        s.kernel.neighbors(x, &mut buf);
        for &(y, w) in &buf {
            assert!((y as usize) < m, "kernel leaves the vertex set");
            if x < y && s.rate * w > 0.0 {
                out.push((x, y, s.rate * w));
            }
        }
    }
    out
}

/// The `(segment, duration)` pieces covering `[0, t]`.
fn pieces(schedule: &Schedule<u32>, t: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let end = schedule.locate(t);
    for w in 0..=end.window {
        let d = if w == end.window { end.offset } else { schedule.window_duration(w) };
        if d > 0.0 {
            out.push((schedule.segment_index(w), d));
        }
    }
    out
}

/// `v ← v e^{tQ}` for a generator given by `jump(v, out)` computing `v (P - I)`
/// scaled so that `P = I + Q/Λ`.
fn uniformize(v: &mut Vec<f64>, lambda: f64, t: f64, step: impl Fn(&[f64], &mut [f64])) {
    if lambda <= 0.0 || t <= 0.0 {
        return;
    }
    let chunks = (lambda * t / CHUNK_MASS).ceil().max(1.0) as usize;
    let dt = t / chunks as f64;
    let mu = lambda * dt;
    let n = v.len();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..chunks {
        let mut weight = (-mu).exp();
        let mut acc: Vec<f64> = v.iter().map(|x| x * weight).collect();
        let mut used = weight;
        term.copy_from_slice(v);
        let mut k = 0u32;
        while 1.0 - used > TAIL {
            k += 1;
            step(&term, &mut next);
            std::mem::swap(&mut term, &mut next);
            weight *= mu / k as f64;
            used += weight;
            for (a, x) in acc.iter_mut().zip(&term) {
                *a += weight * x;
            }
            if k > 10_000 {
                break;
            }
        }
        *v = acc;
    }
}

fn check_size(m: usize, limit: usize, what: &'static str) -> Result<()> {
    if m > limit {
        return Err(Error::SizeLimit { what, value: m, limit });
    }
    Ok(())
}

/// Law of `τ_t` over all `m!` permutations.
#[derive(Clone, Debug, PartialEq)]
pub struct PermutationDistribution {
    pub m: usize,
    pub t: f64,
    pub probs: Vec<f64>,
}

impl PermutationDistribution {
    pub fn prob(&self, perm: &[u8]) -> f64 {
        self.probs[perm_index(perm)]
    }

    /// `P(τ_t(x) = y)` as an `m × m` matrix.
    pub fn marginal(&self) -> Vec<Vec<f64>> {
        let mut k = vec![vec![0.0; self.m]; self.m];
        for (i, &p) in self.probs.iter().enumerate() {
            for (x, &y) in perm_from_index(i, self.m).iter().enumerate() {
                k[x][y as usize] += p;
            }
        }
        k
    }
}

/// Exact law of `τ_t` on the vertex set `0..m`.
pub fn exact_distribution(m: usize, schedule: &Schedule<u32>, t: f64) -> Result<PermutationDistribution> {
    check_size(m, MAX_PERMUTATION_VERTICES, "vertices for the permutation oracle")?;
    let states = factorial(m);
    let perms: Vec<Vec<u8>> = (0..states).map(|i| perm_from_index(i, m)).collect();
    let mut v = vec![0.0; states];
    v[0] = 1.0;
    let mut cache: Vec<Option<(f64, Vec<(Vec<u32>, f64)>)>> = vec![None; schedule.segments().len()];
    for (seg, d) in pieces(schedule, t) {
        let (lambda, moves) = cache[seg].get_or_insert_with(|| {
            let rates = segment_rates(m, schedule, seg);
            let lambda: f64 = rates.iter().map(|r| r.2).sum();
            let moves = rates
                .iter()
                .map(|&(x, y, r)| {
                    // a ring on {x, y} swaps whatever particles sit at x and y
                    let target = perms
                        .iter()
                        .map(|p| {
                            let q: Vec<u8> = p
                                .iter()
                                .map(|&z| match z as u32 {
                                    z if z == x => y as u8,
                                    z if z == y => x as u8,
                                    z => z as u8,
                                })
                                .collect();
                            perm_index(&q) as u32
                        })
                        .collect();
                    (target, r / lambda)
                })
                .collect();
            (lambda, moves)
        });
        let moves = &*moves;
        uniformize(&mut v, *lambda, d, |from, to| {
            to.fill(0.0);
            for (target, q) in moves {
                for (i, &p) in from.iter().enumerate() {
                    if p != 0.0 {
                        to[target[i] as usize] += p * q;
                    }
                }
            }
        });
    }
    Ok(PermutationDistribution { m, t, probs: v })
}

/// Exact law of `τ_1`.
pub fn exact_unit_distribution(m: usize, schedule: &Schedule<u32>) -> Result<PermutationDistribution> {
    exact_distribution(m, schedule, 1.0)
}

/// `K[x][y] = P(Z_t^x = y)` for one particle moving with the same rates.
pub fn exact_particle_kernel(m: usize, schedule: &Schedule<u32>, t: f64) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = (0..m)
        .map(|x| {
            let mut r = vec![0.0; m];
            r[x] = 1.0;
            r
        })
        .collect();
    for (seg, d) in pieces(schedule, t) {
        let rates = segment_rates(m, schedule, seg);
        let mut exit = vec![0.0; m];
        for &(x, y, r) in &rates {
            exit[x as usize] += r;
            exit[y as usize] += r;
        }
        let lambda = exit.iter().cloned().fold(0.0, f64::max);
        let step = |from: &[f64], to: &mut [f64]| {
            for z in 0..m {
                to[z] = from[z] * (1.0 - exit[z] / lambda);
            }
            for &(x, y, r) in &rates {
                let q = r / lambda;
                to[y as usize] += from[x as usize] * q;
                to[x as usize] += from[y as usize] * q;
            }
        };
        for row in rows.iter_mut() {
            uniformize(row, lambda, d, step);
        }
    }
    rows
}

/// `P(|O_n| = j)` for `j = 0..=m`, with `O_n` the inverted orbit of vertex 0.
pub fn exact_orbit_size_distribution(m: usize, schedule: &Schedule<u32>, n: u64) -> Result<Vec<f64>> {
    check_size(m, MAX_ORBIT_VERTICES, "vertices for the orbit oracle")?;
    if n > MAX_ORBIT_STEPS {
        return Err(Error::SizeLimit {
            what: "steps for the orbit oracle",
            value: n as usize,
            limit: MAX_ORBIT_STEPS as usize,
        });
    }
    let unit = exact_unit_distribution(m, schedule)?;
    let states = factorial(m);
    let perms: Vec<Vec<u8>> = (0..states).map(|i| perm_from_index(i, m)).collect();
    // τ_{k+1} = s ∘ τ_k with s an independent copy of τ_1
    let increments: Vec<(usize, f64)> = unit
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i, p))
        .collect();
    let compose: Vec<Vec<u32>> = increments
        .iter()
        .map(|&(s, _)| {
            perms
                .iter()
                .map(|tau| {
                    let q: Vec<u8> = tau.iter().map(|&z| perms[s][z as usize]).collect();
                    perm_index(&q) as u32
                })
                .collect()
        })
        .collect();
    let preimage_of_root: Vec<u32> = perms
        .iter()
        .map(|p| p.iter().position(|&z| z == 0).unwrap() as u32)
        .collect();
    let masks = 1usize << m;
    let mut mass = vec![0.0; states * masks];
    mass[1] = 1.0;
    let mut next = vec![0.0; states * masks];
    for _ in 0..n {
        next.fill(0.0);
        for tau in 0..states {
            for mask in 0..masks {
                let w = mass[tau * masks + mask];
                if w == 0.0 {
                    continue;
                }
                for (j, &(_, p)) in increments.iter().enumerate() {
                    let t2 = compose[j][tau] as usize;
                    let m2 = mask | (1 << preimage_of_root[t2]);
                    next[t2 * masks + m2] += w * p;
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    let mut sizes = vec![0.0; m + 1];
    for (i, w) in mass.iter().enumerate() {
        sizes[(i % masks).count_ones() as usize] += w;
    }
    Ok(sizes)
}

/// `E[(1 - p)^{|O_n|}]`, exactly.
pub fn exact_orbit_pgf(m: usize, schedule: &Schedule<u32>, n: u64, p: f64) -> Result<f64> {
    let sizes = exact_orbit_size_distribution(m, schedule, n)?;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(j, w)| w * (1.0 - p).powi(j as i32))
        .sum())
}

/// Both sides of the comparison between stirred and independent particles:
/// `lhs = P(τ_t(x_i) ∈ A for all i)` and `rhs = Π_i P(Z_t^{x_i} ∈ A)`.
pub fn verify_liggett(
    m: usize,
    schedule: &Schedule<u32>,
    particles: &[u32],
    target: &[u32],
    t: f64,
) -> Result<(f64, f64)> {
    let dist = exact_distribution(m, schedule, t)?;
    let kernel = exact_particle_kernel(m, schedule, t);
    liggett_sides(&dist, &kernel, particles, target)
}

/// [`verify_liggett`] with the two laws already computed.
pub fn liggett_sides(
    dist: &PermutationDistribution,
    kernel: &[Vec<f64>],
    particles: &[u32],
    target: &[u32],
) -> Result<(f64, f64)> {
    let m = dist.m;
    let mut seen = vec![false; m];
    for &x in particles {
        if (x as usize) >= m {
            return Err(Error::invalid("particles", format!("vertex {x} out of range")));
        }
        if std::mem::replace(&mut seen[x as usize], true) {
            return Err(Error::RepeatedParticles);
        }
    }
    let mut in_target = vec![false; m];
    for &a in target {
        in_target[a as usize] = true;
    }
    let lhs = dist
        .probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .filter(|(i, _)| {
            let p = perm_from_index(*i, m);
            particles.iter().all(|&x| in_target[p[x as usize] as usize])
        })
        .map(|(_, &p)| p)
        .sum();
    let rhs = particles
        .iter()
        .map(|&x| {
            (0..m)
                .filter(|&y| in_target[y])
                .map(|y| kernel[x as usize][y])
                .sum::<f64>()
        })
        .product();
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FiniteGraph;
    use crate::kernel::{EdgeWeights, Edgeless};
    use crate::schedule::Segment;
    use num_rational::Ratio;

    #[test]
    fn lehmer_round_trip() {
        for m in 1..=6 {
            for i in 0..factorial(m) {
                assert_eq!(perm_index(&perm_from_index(i, m)), i);
            }
        }
        assert_eq!(perm_from_index(0, 4), vec![0, 1, 2, 3]);
        assert_eq!(perm_index(&[3, 2, 1, 0]), 23);
    }

    #[test]
    fn single_edge_closed_form() {
        let g = FiniteGraph::path(2);
        for c in [0.5, 1.0, 4.0, 30.0] {
            let s = Schedule::homogeneous(EdgeWeights::uniform(&g, c), 1.0).unwrap();
            let d = exact_unit_distribution(2, &s).unwrap();
            let swap = (1.0 - (-2.0 * c).exp()) / 2.0;
            assert!((d.prob(&[1, 0]) - swap).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rate_is_identity() {
        let g = FiniteGraph::cycle(4);
        let s = Schedule::homogeneous(EdgeWeights::unit(&g), 0.0).unwrap();
        let d = exact_unit_distribution(4, &s).unwrap();
        assert_eq!(d.probs[0], 1.0);
        assert_eq!(d.probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn size_limits() {
        let g = FiniteGraph::path(8);
        let s = Schedule::homogeneous(EdgeWeights::unit(&g), 1.0).unwrap();
        assert!(matches!(exact_unit_distribution(8, &s), Err(Error::SizeLimit { .. })));
        let g6 = FiniteGraph::path(6);
        let s6 = Schedule::homogeneous(EdgeWeights::unit(&g6), 1.0).unwrap();
        assert!(exact_orbit_pgf(6, &s6, 2, 0.5).is_err());
    }

    fn two_segments(g: &FiniteGraph) -> Schedule<u32> {
        let n = g.vertex_count();
        let a: Vec<_> = g.edges().iter().enumerate().map(|(i, &(u, v))| (u, v, 0.3 + 0.4 * i as f64)).collect();
        let b: Vec<_> = g.edges().iter().enumerate().map(|(i, &(u, v))| (u, v, 2.0 - 0.3 * i as f64)).collect();
        Schedule::new(vec![
            Segment::new(EdgeWeights::new(n, a, "a").unwrap(), 1.0, Ratio::new(1, 4)),
            Segment::new(EdgeWeights::new(n, b, "b").unwrap(), 1.5, Ratio::new(3, 4)),
        ])
        .unwrap()
    }

    #[test]
    fn marginals_match_particle_kernel() {
        let g = FiniteGraph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let s = two_segments(&g);
        for t in [0.3, 1.0, 2.7] {
            let d = exact_distribution(5, &s, t).unwrap();
            assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.probs.iter().all(|&p| p >= 0.0));
            let k = exact_particle_kernel(5, &s, t);
            let marg = d.marginal();
            for x in 0..5 {
                for y in 0..5 {
                    assert!((k[x][y] - marg[x][y]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn long_intervals_stay_normalised() {
        let g = FiniteGraph::cycle(4);
        let s = Schedule::homogeneous(EdgeWeights::uniform(&g, 50.0), 1.0).unwrap();
        let d = exact_unit_distribution(4, &s).unwrap();
        assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // nearly uniform after so many rings
        assert!(d.probs.iter().all(|&p| (p - 1.0 / 24.0).abs() < 1e-6));
    }

    #[test]
    fn orbit_pgf_trivial_values() {
        let g = FiniteGraph::cycle(4);
        let s = two_segments(&g);
        assert!((exact_orbit_pgf(4, &s, 0, 0.3).unwrap() - 0.7).abs() < 1e-15);
        for n in [1, 5, 9] {
            assert!((exact_orbit_pgf(4, &s, n, 0.0).unwrap() - 1.0).abs() < 1e-12);
        }
        let frozen = Schedule::<u32>::homogeneous(Edgeless, 1.0).unwrap();
        assert_eq!(exact_orbit_pgf(3, &frozen, 7, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn orbit_one_step_by_hand() {
        // on one edge, O_1 = {0, 1} iff τ_1 is the swap
        let g = FiniteGraph::path(2);
        let c = 0.9;
        let s = Schedule::homogeneous(EdgeWeights::uniform(&g, c), 1.0).unwrap();
        let swap = (1.0 - (-2.0 * c).exp()) / 2.0;
        let sizes = exact_orbit_size_distribution(2, &s, 1).unwrap();
        assert!((sizes[2] - swap).abs() < 1e-12);
        // after n steps the orbit is still {0} iff no step swapped an odd number of times
        let sizes = exact_orbit_size_distribution(2, &s, 4).unwrap();
        assert!((sizes[1] - (1.0 - swap).powi(4)).abs() < 1e-12);
    }

    #[test]
    fn liggett_trivial_cases() {
        let g = FiniteGraph::path(4);
        let s = Schedule::homogeneous(EdgeWeights::unit(&g), 1.0).unwrap();
        let (l, r) = verify_liggett(4, &s, &[2], &[0, 1], 1.0).unwrap();
        assert!((l - r).abs() < 1e-12);
        let (l, r) = verify_liggett(4, &s, &[0, 1, 3], &[0, 1, 2, 3], 1.0).unwrap();
        assert!((l - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let (l, r) = verify_liggett(4, &s, &[0, 1], &[0, 1], 1.0).unwrap();
        assert!(l <= r + 1e-10);
        assert_eq!(verify_liggett(4, &s, &[1, 1], &[0], 1.0), Err(Error::RepeatedParticles));
    }
}
