//! Quick checks of the trivial cases plus oracle-versus-sampler smoke tests.

use stir_core::estimators::{check_jensen_lower, check_mean_orbit_identity, check_theorem_bound, orbit_pgf_estimate, EscapeBracket, Verdict};
use stir_core::oracle::{exact_orbit_pgf, exact_unit_distribution, perm_index, verify_liggett};
use stir_core::stirring::with_store;
use stir_core::{
    cube_edge_partition, estimate_escape, forward_stirring, graph_resistance, greedy_matching_decomposition, lattice_resistance, rng, EdgeWeights,
    Edgeless, FiniteGraph, Instant, OffsetKernel, Point, RingStore, Schedule, TraceWalk,
};

pub struct Check {
    pub name: &'static str,
    pub result: Result<(), String>,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Re-reveals rings and compares stirring with backward traces on a small
/// graph. With `fault` the store draws fresh randomness on every query.
fn ringstore_consistency(fault: bool) -> Result<(), String> {
    let g = FiniteGraph::cycle(6);
    let s = Schedule::homogeneous(EdgeWeights::unit(&g), 1.5).map_err(|e| e.to_string())?;
    for seed in 0..50 {
        let mut store = RingStore::new(&s, seed);
        if fault {
            store.inject_fault();
        }
        for w in 0..3 {
            let a = store.reveal_rings(0, 1, w);
            let b = store.reveal_rings(1, 0, w);
            ensure(a == b, || format!("seed {seed}: window {w} rings differ between queries"))?;
        }
        let at = s.locate(2.0);
        let tau = store.forward_permutation(6, at).map_err(|e| e.to_string())?;
        for x in 0..6u32 {
            let back = store.backward_trace(tau[x as usize], at).map_err(|e| e.to_string())?;
            ensure(back == x, || format!("seed {seed}: backward trace of {} gives {back}, not {x}", tau[x as usize]))?;
        }
    }
    Ok(())
}

fn orbit_trivia() -> Result<(), String> {
    let nn = Schedule::homogeneous(OffsetKernel::<3>::nearest_neighbor().unwrap(), 1.0).unwrap();
    let frozen = Schedule::homogeneous(Edgeless, 1.0).unwrap();
    let still = Schedule::homogeneous(OffsetKernel::<2>::nearest_neighbor().unwrap(), 0.0).unwrap();
    for seed in 0..20 {
        let (o, _) = with_store(&nn, seed, |st| st.discrete_orbit(Point::ORIGIN, 0));
        ensure(o == vec![Point::ORIGIN], || "O_0 is not the origin".into())?;
        let (o, _) = with_store(&frozen, seed, |st| st.discrete_orbit(Point::<3>::ORIGIN, 9));
        ensure(o.len() == 1, || "edgeless orbit grew".into())?;
        let (o, _) = with_store(&still, seed, |st| st.forward_orbit(Point::<2>::ORIGIN, 9));
        ensure(o.len() == 1, || "zero-rate forward orbit grew".into())?;
        let (sizes, _) = with_store(&nn, seed, |st| st.discrete_orbit_sizes(Point::ORIGIN, 20));
        ensure(sizes.windows(2).all(|w| w[0] <= w[1]) && sizes.iter().enumerate().all(|(k, &s)| s <= k + 1), || {
            "orbit sizes not monotone or above n+1".into()
        })?;
    }
    Ok(())
}

fn oracle_trivia() -> Result<(), String> {
    let g2 = FiniteGraph::path(2);
    for c in [0.5, 1.0, 4.0] {
        let s = Schedule::homogeneous(EdgeWeights::uniform(&g2, c), 1.0).unwrap();
        let d = exact_unit_distribution(2, &s).map_err(|e| e.to_string())?;
        let want = (1.0 - (-2.0 * c).exp()) / 2.0;
        ensure((d.prob(&[1, 0]) - want).abs() <= 1e-12, || format!("swap law at c={c}"))?;
    }
    let g4 = FiniteGraph::cycle(4);
    let zero = Schedule::homogeneous(EdgeWeights::unit(&g4), 0.0).unwrap();
    let d = exact_unit_distribution(4, &zero).map_err(|e| e.to_string())?;
    ensure(d.probs[0] == 1.0, || "zero rate is not the identity".into())?;
    let e3 = Schedule::homogeneous(Edgeless, 1.0).unwrap();
    ensure(exact_orbit_pgf(3, &e3, 7, 0.5).map_err(|e| e.to_string())? == 0.5, || "edgeless orbit pgf".into())?;
    let s4 = Schedule::homogeneous(EdgeWeights::unit(&FiniteGraph::path(4)), 1.0).unwrap();
    ensure((exact_orbit_pgf(4, &s4, 0, 0.3).map_err(|e| e.to_string())? - 0.7).abs() < 1e-15, || "n = 0 orbit pgf".into())?;
    let (l, r) = verify_liggett(4, &s4, &[2], &[0, 1], 1.0).map_err(|e| e.to_string())?;
    ensure((l - r).abs() <= 1e-12, || "single-particle Liggett sides differ".into())?;
    let (l, r) = verify_liggett(4, &s4, &[0, 1], &[0, 1, 2, 3], 1.0).map_err(|e| e.to_string())?;
    ensure((l - 1.0).abs() <= 1e-12 && (r - 1.0).abs() <= 1e-12, || "sure event".into())?;
    let (l, r) = verify_liggett(4, &s4, &[0, 1], &[0, 1], 1.0).map_err(|e| e.to_string())?;
    ensure(l <= r + 1e-10, || format!("Liggett on the path: {l} > {r}"))
}

fn walk_trivia() -> Result<(), String> {
    let w = TraceWalk::new(OffsetKernel::<2>::nearest_neighbor().unwrap(), 0.0).unwrap();
    ensure(w.step_seeded(Point([2, -1]), 3) == Point([2, -1]), || "zero-rate walk moved".into())?;
    let frozen = TraceWalk::<Point<1>>::conductance(Edgeless).unwrap();
    let e = estimate_escape(&frozen, 3, 100, 1);
    ensure(e.survival(1) == 0.0, || "frozen walk escaped".into())?;
    let edge = FiniteGraph::path(2);
    let r = graph_resistance(&EdgeWeights::uniform(&edge, 2.5), &edge, 1);
    ensure((r - 0.4).abs() < 1e-9, || format!("Ohm's law gave {r}"))?;
    let line = lattice_resistance(&OffsetKernel::<1>::unit_conductance().unwrap(), 10.0);
    ensure((line - 5.0).abs() < 1e-8, || format!("Z^1 radius 10 resistance {line}"))
}

fn combinatorics() -> Result<(), String> {
    let dec = greedy_matching_decomposition(&FiniteGraph::path(4));
    ensure(dec.classes == vec![vec![(0, 1), (2, 3)], vec![(1, 2)]], || format!("path decomposition {:?}", dec.classes))?;
    let (a, b) = cube_edge_partition::<3>().map_err(|e| e.to_string())?;
    for x in [Point([0, 0, 0]), Point([1, -1, 2]), Point([-3, 4, 5])] {
        for k in 0..3 {
            let mut y = x;
            y.0[k] += 1;
            let ina = stir_core::Kernel::weight(&a, x, y) > 0.0;
            let inb = stir_core::Kernel::weight(&b, x, y) > 0.0;
            ensure(ina != inb, || format!("edge {x:?}-{y:?} not in exactly one class"))?;
        }
    }
    Ok(())
}

fn estimator_trivia() -> Result<(), String> {
    let frozen: Schedule<Point<3>> = Schedule::homogeneous(Edgeless, 1.0).unwrap();
    let nn = Schedule::homogeneous(OffsetKernel::<3>::nearest_neighbor().unwrap(), 1.0).unwrap();
    let e = orbit_pgf_estimate(&nn, 0, 0.25, 1000, 1);
    ensure(e.mean == 0.75 && e.stderr == 0.0, || "n = 0 estimate".into())?;
    ensure(orbit_pgf_estimate(&nn, 5, 0.0, 1000, 1).mean == 1.0, || "p = 0 estimate".into())?;
    let r = check_theorem_bound(&frozen, 4, 0.5, 500, EscapeBracket::ZERO, 2, 3.0);
    ensure(r.verdict == Verdict::Holds, || r.summary())?;
    let r = check_jensen_lower(&frozen, 6, 500, 3, 3.0);
    ensure(r.verdict == Verdict::Holds && r.lhs.mean == r.rhs, || r.summary())?;
    let r = check_mean_orbit_identity(&frozen, 6, 500, 4, 3.0);
    ensure(r.verdict == Verdict::Holds, || r.summary())
}

fn swap_law_mc() -> Result<(), String> {
    let g = FiniteGraph::path(2);
    let c = 1.0;
    let s = Schedule::homogeneous(EdgeWeights::uniform(&g, c), 1.0).unwrap();
    let n = 20_000u64;
    let swaps = (0..n).filter(|&i| forward_stirring(2, &s, 1.0, rng::sample_seed(11, i))[0] == 1).count();
    let p = (1.0 - (-2.0 * c).exp()) / 2.0;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let got = swaps as f64 / n as f64;
    ensure((got - p).abs() <= 3.0 * se, || format!("swap frequency {got} vs {p}"))
}

fn oracle_vs_mc() -> Result<(), String> {
    let g = FiniteGraph::cycle(4);
    let s = Schedule::homogeneous(EdgeWeights::unit(&g), 1.0).unwrap();
    let d = exact_unit_distribution(4, &s).map_err(|e| e.to_string())?;
    let n = 100_000u64;
    let mut counts = vec![0u64; 24];
    for i in 0..n {
        let tau = forward_stirring(4, &s, 1.0, rng::sample_seed(12, i));
        let p: Vec<u8> = tau.iter().map(|&v| v as u8).collect();
        counts[perm_index(&p)] += 1;
    }
    let tv = 0.5 * counts.iter().zip(&d.probs).map(|(&c, &p)| (c as f64 / n as f64 - p).abs()).sum::<f64>();
    ensure(tv < 0.015, || format!("total variation {tv}"))?;
    let exact = exact_orbit_pgf(4, &s, 3, 0.5).map_err(|e| e.to_string())?;
    let mc = orbit_pgf_estimate(&s, 3, 0.5, 20_000, 13);
    ensure((mc.mean - exact).abs() <= 3.0 * mc.stderr, || format!("orbit pgf {} vs exact {exact}", mc.mean))
}

fn shared_store_inclusion() -> Result<(), String> {
    let s = Schedule::homogeneous(OffsetKernel::<2>::nearest_neighbor().unwrap(), 1.0).unwrap();
    for seed in 0..200 {
        let ((d, c), _) = with_store(&s, seed, |st| Ok((st.discrete_orbit(Point::ORIGIN, 6)?, st.continuous_orbit(Point::ORIGIN, 6.0)?)));
        ensure(d.iter().all(|x| c.binary_search(x).is_ok()), || format!("seed {seed}: O_6 not inside continuous orbit"))?;
        let at = Instant { window: 3, offset: 0.0 };
        let (a, _) = with_store(&s, seed, |st| st.backward_trace(Point([1, 1]), at));
        let (b, _) = with_store(&s, seed, |st| st.backward_trace(Point([1, 1]), at));
        ensure(a == b, || format!("seed {seed}: backward trace not reproducible"))?;
    }
    Ok(())
}

/// Runs every check. `fault` corrupts the ring store's randomness.
pub fn run(fault: bool) -> Vec<Check> {
    vec![
        Check { name: "ringstore-consistency", result: ringstore_consistency(fault) },
        Check { name: "orbit-trivial-cases", result: orbit_trivia() },
        Check { name: "oracle-trivial-cases", result: oracle_trivia() },
        Check { name: "walk-trivial-cases", result: walk_trivia() },
        Check { name: "matching-and-cube-partition", result: combinatorics() },
        Check { name: "estimator-trivial-cases", result: estimator_trivia() },
        Check { name: "swap-law-vs-closed-form", result: swap_law_mc() },
        Check { name: "oracle-vs-sampler", result: oracle_vs_mc() },
        Check { name: "shared-store-inclusion", result: shared_store_inclusion() },
    ]
}
