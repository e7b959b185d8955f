//! One function per experiment kind.

use std::path::Path;

use stir_core::constructions::{build_graph_cutoff, build_zd_cutoff, verify_graph_cutoff, verify_zd_cutoff, CutoffReport, ReservoirConfig, verify_sandwich};
use stir_core::estimators::{
    check_continuous_corollary, check_sublinear_tail, collect_orbit_stats, decay_slope, jensen_report, mean_identity_report, theorem_report,
    BoundReport, Direction, EscapeBracket, TailRegime, Verdict,
};
use stir_core::oracle::{exact_distribution, exact_orbit_pgf, exact_particle_kernel, liggett_sides, perm_index, MAX_ORBIT_VERTICES};
use stir_core::stats::{run_blocks, RunningStats};
use stir_core::stirring::with_store;
use stir_core::{
    classify_lattice, escape_lower_bound, estimate_escape, forward_stirring, greedy_matching_decomposition, rng, ClassifierThresholds, Estimate,
    FiniteGraph, Recurrence, Schedule, Site, TraceWalk,
};

use crate::config::Section;
use crate::model::{self, Finite, Lattice, Model};
use crate::output::{Row, REPORTED};
use crate::RunError;

pub struct Ctx<'a> {
    pub sigma: f64,
    pub seed: u64,
    pub base_dir: &'a Path,
}

/// What an experiment produced besides rows.
#[derive(Default)]
pub struct Extra {
    pub lines: Vec<String>,
}

type Out = Result<(Vec<Row>, Extra), RunError>;

pub fn run(sec: &Section, ctx: &Ctx) -> Out {
    let out = match sec.kind.as_str() {
        "cutoff-verify" => cutoff_verify(sec, ctx),
        "decompose" => decompose(sec, ctx),
        "oracle-suite" => oracle_suite(sec, ctx),
        "classify" => classify(sec, ctx),
        _ => {
            let model = model::build(sec, ctx.base_dir)?;
            let mut out = match &model {
                Model::L1(l) => generic(sec, ctx, &l.schedule, Bracketing::Lattice(&|r| l.resistance(r), l.lambda, l.frozen)),
                Model::L2(l) => generic(sec, ctx, &l.schedule, Bracketing::Lattice(&|r| l.resistance(r), l.lambda, l.frozen)),
                Model::L3(l) => generic(sec, ctx, &l.schedule, Bracketing::Lattice(&|r| l.resistance(r), l.lambda, l.frozen)),
                Model::L4(l) => generic(sec, ctx, &l.schedule, Bracketing::Lattice(&|r| l.resistance(r), l.lambda, l.frozen)),
                Model::Finite(f) => generic(sec, ctx, &f.schedule, Bracketing::Recurrent),
            }?;
            out.1.lines.insert(0, model.describe());
            Ok(out)
        }
    }?;
    sec.finish()?;
    Ok(out)
}

/// How the escape probability is bracketed.
enum Bracketing<'a> {
    /// Resistance at a radius, when the kernel is homogeneous; the rate; frozen.
    Lattice(&'a dyn Fn(f64) -> Option<f64>, f64, bool),
    /// Finite connected graphs: every walk returns.
    Recurrent,
}

impl Bracketing<'_> {
    fn lower(&self, radius: f64) -> (f64, String) {
        match self {
            Bracketing::Lattice(_, _, true) | Bracketing::Recurrent => (0.0, "P(T=inf) = 0".into()),
            Bracketing::Lattice(res, lambda, false) => match res(radius) {
                Some(r) => (
                    escape_lower_bound(*lambda, r),
                    format!("P_lower = (1-e^-{lambda})/R_eff({radius}) = (1-e^-{lambda})/{r:.6}"),
                ),
                None => (0.0, "no resistance bound for this schedule; P_lower = 0".into()),
            },
        }
    }

    fn exact_zero(&self) -> bool {
        matches!(self, Bracketing::Lattice(_, _, true) | Bracketing::Recurrent)
    }
}

fn pgf_anchor(p: f64) -> String {
    format!("E[(1-p)^|O_n|], p={p}")
}

fn generic<S: Site>(sec: &Section, ctx: &Ctx, schedule: &Schedule<S>, bracketing: Bracketing) -> Out {
    let samples = sec.u64_or("samples", 10_000)?;
    if samples == 0 {
        return Err(sec.invalid("samples", "samples must be positive"));
    }
    let sigma = ctx.sigma;
    let seed = ctx.seed;
    let mut extra = Extra::default();
    let mut rows = Vec::new();
    let ns = |required: bool| -> Result<Vec<u64>, RunError> {
        match sec.u64_list("n")? {
            Some(v) => Ok(v),
            None if required => Err(sec.invalid("n", format!("[{}] needs `n`", sec.kind))),
            None => Ok(Vec::new()),
        }
    };
    let ps = || -> Result<Vec<f64>, RunError> {
        let ps = sec.f64_list("p")?.unwrap_or_else(|| vec![0.5]);
        if ps.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(sec.invalid("p", "p must lie in [0, 1]"));
        }
        Ok(ps)
    };
    let walk = || TraceWalk::scheduled(schedule.clone());
    match sec.kind.as_str() {
        "orbit-stats" => {
            let ns = ns(false)?;
            let ps = ps()?;
            let stats = collect_orbit_stats(schedule, &ns, &ps, samples, seed);
            for &n in &ns {
                rows.push(Row::estimate("orbit-size-mean", "E|O_n|", n as f64, stats.size_estimate(n)));
                for &p in &ps {
                    rows.push(Row::estimate("orbit-pgf", pgf_anchor(p), n as f64, stats.pgf_estimate(n, p)));
                }
            }
            for t in sec.f64_list("t")?.unwrap_or_default() {
                if t < 0.0 {
                    return Err(sec.invalid("t", "t must be non-negative"));
                }
                rows.push(Row::estimate("continuous-orbit-size-mean", "E|O_t| (continuous time)", t, continuous_sizes(schedule, t, samples, seed)));
            }
        }
        "escape" => {
            let n_max = sec.u64_or("n_max", 1000)?.max(1);
            let horizons = sec.u64_list("horizons")?.unwrap_or_else(|| vec![n_max]);
            if let Some(&h) = horizons.iter().find(|&&h| h > n_max) {
                return Err(sec.invalid("horizons", format!("horizon {h} exceeds n_max {n_max}")));
            }
            let e = estimate_escape(&walk(), n_max, samples, seed);
            for &h in &horizons {
                let est = Estimate { mean: e.survival(h), stderr: e.survival_stderr(h), count: samples, seed };
                rows.push(Row::estimate("escape-survival", "P(T>n)", h as f64, est));
            }
            if let Some(radius) = sec.f64("radius")? {
                let (lower, how) = bracketing.lower(radius);
                let lhs = e.survival(n_max);
                let se = e.survival_stderr(n_max);
                let v = Verdict::decide(Direction::GreaterEq, lhs, lower, se, sigma);
                rows.push(
                    Row {
                        check: "escape-lower-bound".into(),
                        horizon: n_max as f64,
                        mean: lhs,
                        stderr: se,
                        rhs: lower,
                        verdict: v.label().into(),
                        samples,
                        seed,
                        anchor: "P(T>n) >= P(T=inf) >= (1-e^-lambda)/R_eff".into(),
                        note: String::new(),
                    }
                    .with_note(how),
                );
            }
        }
        "bound-check" => {
            let ns = ns(false)?;
            let ts = sec.f64_list("t")?.unwrap_or_default();
            if ns.is_empty() && ts.is_empty() {
                return Err(sec.invalid("n", "[bound-check] needs `n` or `t`"));
            }
            let ps = ps()?;
            let radius = sec.f64_or("radius", 40.0)?;
            let escape_samples = sec.u64_or("escape_samples", 10_000)?.max(1);
            let escape_horizon = sec.u64_or("escape_horizon", 10_000)?.max(1);
            let bracket = bracket(&bracketing, radius, || estimate_escape(&walk(), escape_horizon, escape_samples, rng::derive(seed, 1)).upper_bracket(sigma), &mut extra);
            if !ns.is_empty() {
                let stats = collect_orbit_stats(schedule, &ns, &ps, samples, seed);
                for &n in &ns {
                    for &p in &ps {
                        rows.push(theorem_report(stats.pgf_estimate(n, p), n, p, bracket, sigma).into());
                    }
                }
            }
            for &t in &ts {
                if t <= 0.0 {
                    return Err(sec.invalid("t", "t must be positive"));
                }
                rows.push(check_continuous_corollary(schedule, t, samples, bracket, rng::derive(seed, 2), sigma).into());
            }
        }
        "jensen" => {
            let ns = ns(true)?;
            let stats = collect_orbit_stats(schedule, &ns, &[0.5], samples, seed);
            for &n in &ns {
                rows.push(jensen_report(stats.pgf_estimate(n, 0.5), stats.size_estimate(n), n, sigma).into());
            }
            if let Some(slope) = decay_slope(&stats, 0.5) {
                let top = ns.iter().copied().max().unwrap_or(0) as f64;
                rows.push(
                    Row::estimate("decay-slope", "-d/dn log E[(1/2)^|O_n|] vs log(2) P(T=inf)", top, slope)
                        .with_note("weighted fit over the listed n; asymptotic rate, not judged"),
                );
            }
        }
        "mean-identity" => {
            let ns = ns(true)?;
            let stats = collect_orbit_stats(schedule, &ns, &[], samples, seed);
            let top = ns.iter().copied().max().unwrap_or(1).max(1);
            let walk_samples = sec.u64_or("walk_samples", samples)?.max(1);
            let e = estimate_escape(&walk(), top, walk_samples, rng::derive(seed, 1));
            for &n in &ns {
                rows.push(mean_identity_report(stats.size_estimate(n), e.partial_sum(n), n, sigma).into());
            }
        }
        "tail" => {
            let ns = ns(true)?;
            let epsilon = sec.f64_or("epsilon", 0.1)?;
            if !(epsilon > 0.0 && epsilon < 1.0) {
                return Err(sec.invalid("epsilon", "epsilon must lie in (0, 1)"));
            }
            let regime = match sec.str_or("regime", "recurrent") {
                "recurrent" => TailRegime::Recurrent,
                "transient" => {
                    let (p_lower, how) = bracketing.lower(sec.f64_or("radius", 40.0)?);
                    if p_lower <= 0.0 {
                        return Err(sec.invalid("regime", "transient regime needs a positive resistance bound"));
                    }
                    extra.lines.push(how);
                    TailRegime::Transient { p_lower }
                }
                other => return Err(sec.invalid("regime", format!("unknown regime `{other}`"))),
            };
            rows.extend(check_sublinear_tail(schedule, &ns, epsilon, regime, samples, seed, sigma).into_iter().map(Row::from));
        }
        "reservoir" => {
            let n = sec.require_u64("n")?;
            let big_n = sec.require_u64("reservoir")? as usize;
            let cfg = ReservoirConfig::new(big_n, n, schedule.clone())?;
            let r = verify_sandwich(&cfg, samples, seed);
            let nf = n as f64;
            rows.push(Row::estimate("reservoir-p-empty", "P(A_nhat = empty)", nf, r.p_empty));
            rows.push(Row::estimate("reservoir-orbit-pgf", "E[(1/2)^|O_n|]", nf, r.orbit_pgf));
            let v = Verdict::decide(Direction::GreaterEq, r.difference.mean, 0.0, r.difference.stderr, sigma);
            rows.push(Row {
                check: "reservoir-sandwich".into(),
                horizon: nf,
                mean: r.difference.mean,
                stderr: r.difference.stderr,
                rhs: 0.0,
                verdict: v.label().into(),
                samples,
                seed,
                anchor: format!("P(A_nhat = empty) - E[(1/2)^|O_n|] >= 0, N={big_n}"),
                note: "paired per-sample difference".into(),
            });
            let q = r.p_update;
            let m = r.shuffles;
            rows.push(Row {
                check: "reservoir-p-update".into(),
                horizon: nf,
                mean: r.p_update_empirical(),
                stderr: (q * (1.0 - q) / m as f64).sqrt(),
                rhs: q,
                verdict: if r.p_update_matches(sigma) { Verdict::Holds } else { Verdict::Violated }.label().into(),
                samples: m,
                seed,
                anchor: format!("P(shuffle interval rings) = 1-e^-N, N={big_n}"),
                note: "binomial stderr at the expected value plus half a count".into(),
            });
            let (pm, pm_se) = r.p_marked_empirical();
            let marked = BoundReport::new(
                "reservoir-p-marked",
                format!("p_marked >= (1/N)(1-e^-N)(1-1/N), N={big_n}"),
                nf,
                Estimate {
                    mean: pm,
                    stderr: pm_se,
                    count: r.shuffles,
                    seed,
                },
                r.p_marked_bound,
                0.0,
                Direction::GreaterEq,
                sigma,
            )
            .with_note(format!("exact p_marked = {:.6e}", r.p_marked));
            // the bound is only claimed for N large enough; below 16 it is shown, not judged
            rows.push(if big_n >= 16 { marked } else { marked.reported_only() }.into());
            rows.push(Row::exact(
                "reservoir-conservation",
                "marked particles conserved",
                nf,
                r.conservation_failures as f64,
                0.0,
                r.conservation_failures == 0,
                samples,
                seed,
            ));
        }
        other => unreachable!("kind {other} dispatched elsewhere"),
    }
    Ok((rows, extra))
}

fn bracket(b: &Bracketing, radius: f64, upper: impl FnOnce() -> f64, extra: &mut Extra) -> EscapeBracket {
    if b.exact_zero() {
        extra.lines.push("P(T=inf) = 0 exactly".into());
        return EscapeBracket::ZERO;
    }
    let (lower, how) = b.lower(radius);
    let upper = upper().min(1.0);
    extra.lines.push(format!("{how}; P_upper = {upper:.6}"));
    EscapeBracket { lower, upper }
}

fn continuous_sizes<S: Site>(schedule: &Schedule<S>, t: f64, samples: u64, seed: u64) -> Estimate {
    let root = S::origin();
    let blocks = run_blocks(samples, |range| {
        let mut s = RunningStats::new();
        for i in range {
            let (len, _) = with_store(schedule, rng::sample_seed(seed, i), |st| Ok(st.continuous_orbit(root, t)?.len()));
            s.push(len as f64);
        }
        s
    });
    stir_core::stats::merge_all(&blocks).estimate(seed)
}

fn cutoff_rows(r: &CutoffReport, ctx: &Ctx, graph_bound: u64, lattice: bool) -> Vec<Row> {
    let (samples, seed) = (r.samples, ctx.seed);
    let mut rows = Vec::new();
    let (range, metric) = if lattice {
        (r.max_range_euclidean, "Euclidean")
    } else {
        (r.max_range_graph as f64, "graph")
    };
    rows.push(
        Row::exact(
            "cutoff-range",
            format!("max displacement of tau_1 <= {} ({metric})", r.range_bound),
            1.0,
            range,
            r.range_bound as f64,
            r.range_violations == 0,
            samples,
            seed,
        )
        .with_note(format!("{} violations", r.range_violations)),
    );
    if lattice {
        let mut row = Row::exact(
            "cutoff-range-graph",
            format!("max graph displacement of tau_1 vs 3d = {graph_bound}"),
            1.0,
            r.max_range_graph as f64,
            graph_bound as f64,
            r.max_range_graph <= graph_bound,
            samples,
            seed,
        );
        row.verdict = REPORTED.into();
        rows.push(row);
        rows.push(Row::exact(
            "cutoff-confinement",
            "each third moves particles inside one cube",
            1.0,
            r.confinement_violations as f64,
            0.0,
            r.confinement_violations == 0,
            samples,
            seed,
        ));
    }
    rows.push(Row::exact(
        "cutoff-bijection",
        "tau_1 is a bijection of the window",
        1.0,
        r.bijection_failures as f64,
        0.0,
        r.bijection_failures == 0,
        samples,
        seed,
    ));
    if let Some((m, se)) = r.min_conductance {
        let mut v = Verdict::decide(Direction::GreaterEq, m, 0.0, se, ctx.sigma);
        if m <= 0.0 {
            v = Verdict::Violated;
        }
        rows.push(Row {
            check: "cutoff-conductance".into(),
            horizon: 1.0,
            mean: m,
            stderr: se,
            rhs: 0.0,
            verdict: v.label().into(),
            samples,
            seed,
            anchor: "min over neighbours of P(x,y) > 0".into(),
            note: String::new(),
        });
    }
    if let Some(e) = r.symmetry_error {
        rows.push(Row::exact("cutoff-symmetry", "max |P(x,y) - P(y,x)| <= 1e-12", 1.0, e, 1e-12, e <= 1e-12, samples, seed));
    }
    rows
}

fn cutoff_verify(sec: &Section, ctx: &Ctx) -> Out {
    let samples = sec.u64_or("samples", 10_000)?;
    let mut extra = Extra::default();
    let rows = match model::graph(sec, ctx.base_dir)? {
        Some(g) => {
            let (cut, dec) = build_graph_cutoff(&g)?;
            extra.lines.push(format!(
                "graph cutoff: {} matchings, max degree {}, bound 4h-2 = {}",
                dec.class_count(),
                g.max_degree(),
                cut.range_bound
            ));
            let r = verify_graph_cutoff(&cut, &g, samples, ctx.seed);
            cutoff_rows(&r, ctx, cut.graph_bound, false)
        }
        None => {
            let dim = sec.require_u64("dim")?;
            macro_rules! zd {
                ($d:literal) => {{
                    let cut = build_zd_cutoff::<$d>()?;
                    let hw = sec.u64_or("half_width", (3 * cut.range_bound).div_ceil(2))? as i64;
                    if (hw as u64) * 2 < 3 * cut.range_bound {
                        return Err(sec.invalid("half_width", "window side must be at least three times the range bound"));
                    }
                    extra.lines.push(format!("Z^{} cube cutoff, window [-{hw}, {hw})^{}, range bound {}", $d, $d, cut.range_bound));
                    let r = verify_zd_cutoff::<$d>(&cut, hw, samples, ctx.seed);
                    cutoff_rows(&r, ctx, cut.graph_bound, true)
                }};
            }
            match dim {
                1 => zd!(1),
                2 => zd!(2),
                3 => zd!(3),
                4 => zd!(4),
                _ => return Err(sec.invalid("dim", "lattice dimension must be 1, 2, 3 or 4")),
            }
        }
    };
    Ok((rows, extra))
}

/// Matching classes as `E_k = {(u,v), ...}` lines.
pub fn decomposition_lines(g: &FiniteGraph) -> (Vec<String>, stir_core::MatchingDecomposition) {
    let dec = greedy_matching_decomposition(g);
    let lines = dec
        .classes
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let edges: Vec<String> = c.iter().map(|(u, v)| format!("({u},{v})")).collect();
            format!("E_{} = {{{}}}", k + 1, edges.join(", "))
        })
        .collect();
    (lines, dec)
}

fn decompose(sec: &Section, ctx: &Ctx) -> Out {
    let g = model::graph(sec, ctx.base_dir)?.ok_or_else(|| sec.invalid("graph", "decompose needs a finite graph"))?;
    let (lines, dec) = decomposition_lines(&g);
    let h = g.max_degree();
    let bound = (2 * h).saturating_sub(1);
    let valid = dec.validate(g.vertex_count(), g.edges()).is_ok();
    let rows = vec![
        Row::exact(
            "matching-classes",
            "number of matchings N <= 2h-1",
            h as f64,
            dec.class_count() as f64,
            bound as f64,
            dec.class_count() <= bound.max(0),
            g.edges().len() as u64,
            ctx.seed,
        ),
        Row::exact(
            "matching-valid",
            "classes are matchings covering every edge once",
            h as f64,
            if valid { 0.0 } else { 1.0 },
            0.0,
            valid,
            g.edges().len() as u64,
            ctx.seed,
        ),
    ];
    Ok((rows, Extra { lines }))
}

fn oracle_suite(sec: &Section, ctx: &Ctx) -> Out {
    let model = model::build(sec, ctx.base_dir)?;
    let Model::Finite(Finite { graph, schedule, .. }) = &model else {
        return Err(sec.invalid("graph", "oracle-suite needs a finite graph"));
    };
    let m = graph.vertex_count();
    let t = sec.f64_or("t", 1.0)?;
    let samples = sec.u64_or("samples", 100_000)?;
    let orbit_ns = sec.u64_list("n")?.unwrap_or_else(|| vec![4]);
    let tv_max = sec.f64("tv_max")?;
    let seed = ctx.seed;
    let dist = exact_distribution(m, schedule, t)?;
    let kernel = exact_particle_kernel(m, schedule, t);
    let mut rows = Vec::new();

    let total: f64 = dist.probs.iter().sum();
    rows.push(Row::exact("oracle-normalization", "sum of permutation probabilities = 1 within 1e-12", t, total, 1.0, (total - 1.0).abs() <= 1e-12, 0, seed));

    let marginal = dist.marginal();
    let gap = max_gap(&marginal, &kernel);
    rows.push(Row::exact("oracle-marginal", "one-particle marginal = kernel product within 1e-12", t, gap, 1e-12, gap <= 1e-12, 0, seed));

    let asym = (0..m).flat_map(|x| (0..m).map(move |y| (x, y))).map(|(x, y)| (kernel[x][y] - kernel[y][x]).abs()).fold(0.0, f64::max);
    let mut sym = Row::exact("oracle-symmetry", "max |P(x,y) - P(y,x)| <= 1e-12", t, asym, 1e-12, asym <= 1e-12, 0, seed);
    if !(schedule.is_palindromic() && t == 1.0) {
        sym.verdict = REPORTED.into();
        sym.note = "not asserted: schedule is not palindromic over this time".into();
    }
    rows.push(sym);

    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0u64;
    for k in 2..=3.min(m) {
        for particles in subsets(m, k) {
            for mask in 0..1u32 << m {
                let target: Vec<u32> = (0..m as u32).filter(|&a| mask >> a & 1 == 1).collect();
                let (l, r) = liggett_sides(&dist, &kernel, &particles, &target)?;
                worst = worst.max(l - r);
                cases += 1;
            }
        }
    }
    if cases > 0 {
        rows.push(Row::exact(
            "liggett",
            "P(tau_t(x_i) in A for all i) <= prod P(Z_t^x_i in A) + 1e-10",
            t,
            worst,
            1e-10,
            worst <= 1e-10,
            cases,
            seed,
        ));
    }

    if samples > 0 {
        let at = t;
        let blocks = run_blocks(samples, |range| {
            let mut counts = vec![0u64; dist.probs.len()];
            for i in range {
                let tau = forward_stirring(m, schedule, at, rng::sample_seed(seed, i));
                let p: Vec<u8> = tau.iter().map(|&v| v as u8).collect();
                counts[perm_index(&p)] += 1;
            }
            counts
        });
        let mut counts = vec![0u64; dist.probs.len()];
        for b in blocks {
            counts.iter_mut().zip(b).for_each(|(c, x)| *c += x);
        }
        let tv = 0.5 * counts.iter().zip(&dist.probs).map(|(&c, &p)| (c as f64 / samples as f64 - p).abs()).sum::<f64>();
        // mean total variation of an exact sampler, normal approximation
        let expected = 0.5 * dist.probs.iter().map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * samples as f64)).sqrt()).sum::<f64>();
        let limit = tv_max.unwrap_or(2.0 * expected);
        rows.push(
            Row::exact("oracle-vs-mc", "total variation(MC, exact) below limit", t, tv, limit, tv < limit, samples, seed)
                .with_note(format!("expected TV for an exact sampler {expected:.2e}")),
        );
        if m <= MAX_ORBIT_VERTICES {
            let stats = collect_orbit_stats(schedule, &orbit_ns, &[0.5], samples, rng::derive(seed, 1));
            for &n in &orbit_ns {
                let exact = exact_orbit_pgf(m, schedule, n, 0.5)?;
                let est = stats.pgf_estimate(n, 0.5);
                let v = Verdict::decide(Direction::Equal, est.mean, exact, est.stderr, ctx.sigma);
                rows.push(Row {
                    check: "orbit-pgf-vs-exact".into(),
                    horizon: n as f64,
                    mean: est.mean,
                    stderr: est.stderr,
                    rhs: exact,
                    verdict: v.label().into(),
                    samples,
                    seed: est.seed,
                    anchor: "MC E[(1/2)^|O_n|] = exact dynamic program".into(),
                    note: String::new(),
                });
            }
        }
    }
    Ok((rows, Extra { lines: vec![model.describe()] }))
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs())).fold(0.0, f64::max)
}

fn subsets(m: usize, k: usize) -> Vec<Vec<u32>> {
    (0u32..1 << m)
        .filter(|s| s.count_ones() as usize == k)
        .map(|s| (0..m as u32).filter(|&i| s >> i & 1 == 1).collect())
        .collect()
}

fn classify(sec: &Section, ctx: &Ctx) -> Out {
    let model = model::build(sec, ctx.base_dir)?;
    let horizons = sec.u64_list("horizons")?.unwrap_or_else(|| vec![100, 1000, 10_000]);
    let radii = sec.f64_list("radii")?.unwrap_or_else(|| vec![10.0, 20.0, 40.0]);
    let samples = sec.u64_or("samples", 4000)?.max(1);
    let d = ClassifierThresholds::default();
    let th = ClassifierThresholds {
        plateau_ratio: sec.f64_or("plateau_ratio", d.plateau_ratio)?,
        survival_floor: sec.f64_or("survival_floor", d.survival_floor)?,
        growth_ratio: sec.f64_or("growth_ratio", d.growth_ratio)?,
    };
    if horizons.len() < 3 || !horizons.windows(2).all(|w| w[0] < w[1]) {
        return Err(sec.invalid("horizons", "need at least three increasing horizons"));
    }
    if radii.len() < 3 || !radii.windows(2).all(|w| w[0] < w[1]) {
        return Err(sec.invalid("radii", "need at least three increasing radii"));
    }
    let expect = match sec.str("expect") {
        None => None,
        Some("transient") => Some(Recurrence::Transient),
        Some("recurrent") => Some(Recurrence::Recurrent),
        Some(other) => return Err(sec.invalid("expect", format!("unknown class `{other}`"))),
    };
    fn go<const D: usize>(l: &Lattice<D>, sec: &Section, h: &[u64], s: u64, seed: u64, r: &[f64], th: ClassifierThresholds) -> Result<stir_core::Classification, RunError> {
        if l.conductances.is_none() {
            return Err(sec.invalid("kernel", "classify needs a homogeneous kernel"));
        }
        Ok(classify_lattice(&TraceWalk::scheduled(l.schedule.clone()), h, s, seed, r, th))
    }
    let c = match &model {
        Model::L1(l) => go(l, sec, &horizons, samples, ctx.seed, &radii, th)?,
        Model::L2(l) => go(l, sec, &horizons, samples, ctx.seed, &radii, th)?,
        Model::L3(l) => go(l, sec, &horizons, samples, ctx.seed, &radii, th)?,
        Model::L4(l) => go(l, sec, &horizons, samples, ctx.seed, &radii, th)?,
        Model::Finite(_) => return Err(sec.invalid("graph", "classify needs a lattice")),
    };
    let mut rows = Vec::new();
    for (&h, &(p, se)) in c.horizons.iter().zip(&c.survival) {
        rows.push(Row::estimate("escape-survival", "P(T>n)", h as f64, Estimate { mean: p, stderr: se, count: samples, seed: ctx.seed }));
    }
    for (&r, &x) in c.radii.iter().zip(&c.resistances) {
        rows.push(Row::estimate("effective-resistance", "R_eff(0, sphere of radius r)", r, Estimate::exact(x)));
    }
    rows.push(Row {
        check: "classify".into(),
        horizon: *c.horizons.last().unwrap() as f64,
        mean: c.survival_ratio,
        stderr: 0.0,
        rhs: th.plateau_ratio,
        verdict: c.verdict.label().into(),
        samples,
        seed: ctx.seed,
        anchor: "transient iff escape probability > 0 (numerical diagnostic)".into(),
        note: format!("resistance increment ratio {:.4} vs {}", c.growth_ratio, th.growth_ratio),
    });
    if let Some(e) = expect {
        rows.push(Row::exact(
            "classify-expectation",
            format!("classifier returns {}", e.label()),
            *c.horizons.last().unwrap() as f64,
            c.survival_ratio,
            th.plateau_ratio,
            c.verdict == e,
            samples,
            ctx.seed,
        ));
    }
    Ok((rows, Extra { lines: vec![model.describe(), c.summary()] }))
}

