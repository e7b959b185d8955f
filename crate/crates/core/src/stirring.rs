//! The graphical representation of the stirring process.
//!
//! Every edge `{x, y}` carries its own Poisson process of rings. In window `w`
//! the rate is `rate(w) * w(x, y)` where both factors come from the segment
//! that window belongs to. The ring offsets of an edge in a window are a pure
//! function of `(seed, edge, window)`, so they can be revealed lazily, in any
//! order, from either endpoint.
//!
//! A ring on `{x, y}` swaps the contents of `x` and `y`. Tracing a site
//! backwards through the rings gives the inverse permutation, and tracing it
//! forwards gives the path of a single particle.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::graph::Site;
use crate::rng;
use crate::schedule::{Instant, Schedule};

/// How many times a sample is regenerated after an exact tie between ring times.
const RETRIES: u64 = 8;

#[inline]
fn edge_key<S: Site>(x: S, y: S) -> u64 {
    edge_key_with(x, x.key(), y)
}

#[inline]
fn edge_key_with<S: Site>(x: S, x_key: u64, y: S) -> u64 {
    if x < y {
        rng::combine(x_key, y.key())
    } else {
        rng::combine(y.key(), x_key)
    }
}

#[inline]
fn fault_keyed(fault: &mut Option<u64>, window_key: u64, id: u64) -> u64 {
    let mut key = rng::combine(window_key, id);
    if let Some(counter) = fault.as_mut() {
        *counter += 1;
        key = rng::combine(key, *counter);
    }
    key
}

/// Lazily revealed ring times for one sample.
pub struct RingStore<'a, S: Site> {
    schedule: &'a Schedule<S>,
    seed: u64,
    arena: Vec<(f64, S)>,
    incident: FxHashMap<(S, u64), (u32, u32)>,
    /// Site occupied at time 0 by a backward path that enters window `w` from
    /// its upper end at `x`. Paths that meet there coincide from then on.
    boundary: FxHashMap<(S, u64), S>,
    scratch: Vec<(S, f64)>,
    path: Vec<(S, u64)>,
    fault: Option<u64>,
}

impl<'a, S: Site> RingStore<'a, S> {
    pub fn new(schedule: &'a Schedule<S>, seed: u64) -> Self {
        RingStore {
            schedule,
            seed,
            arena: Vec::new(),
            incident: FxHashMap::default(),
            boundary: FxHashMap::default(),
            scratch: Vec::new(),
            path: Vec::new(),
            fault: None,
        }
    }

    /// Forget everything and start a new realization, keeping allocations.
    pub fn reset(&mut self, seed: u64) {
        self.seed = seed;
        self.arena.clear();
        self.incident.clear();
        self.boundary.clear();
        if self.fault.is_some() {
            self.fault = Some(0);
        }
    }

    /// Deliberately breaks reproducibility: every reveal draws from a fresh
    /// stream. Only used to show the consistency checks can fail.
    pub fn inject_fault(&mut self) {
        self.fault = Some(0);
    }

    /// Number of `(site, window)` pairs whose incident rings have been revealed.
    pub fn revealed_site_windows(&self) -> usize {
        self.incident.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn schedule(&self) -> &'a Schedule<S> {
        self.schedule
    }

    #[inline]
    fn window_key(&mut self, x: S, y: S, window: u64) -> u64 {
        let key = rng::combine(self.seed, window);
        self.keyed(key, edge_key(x, y))
    }

    #[inline]
    fn keyed(&mut self, window_key: u64, edge: u64) -> u64 {
        fault_keyed(&mut self.fault, window_key, edge)
    }

    /// Ring offsets of the edge `{x, y}` inside `window`, increasing.
    pub fn reveal_rings(&mut self, x: S, y: S, window: u64) -> Vec<f64> {
        let seg = self.schedule.segment_for_window(window);
        let duration = self.schedule.window_duration(window);
        let mut out = Vec::new();
        if let Some(blocks) = seg.kernel.block_rings() {
            let wkey = rng::combine(self.seed, window);
            let fault = &mut self.fault;
            blocks.edge(x, y, seg.rate, duration, &mut |id| fault_keyed(fault, wkey, id), &mut out);
            return out;
        }
        let rate = seg.rate * seg.kernel.weight(x, y);
        let key = self.window_key(x, y, window);
        rng::poisson_arrivals(key, rate, duration, (-rate * duration).exp(), |t| out.push(t));
        out
    }

    /// Absolute ring times of `{x, y}` in `[t0, t1)`.
    pub fn reveal_interval(&mut self, x: S, y: S, t0: f64, t1: f64) -> Vec<f64> {
        assert!(t0 < t1, "empty interval");
        let first = self.schedule.locate(t0).window;
        let last = self.schedule.locate(t1).window;
        let mut out = Vec::new();
        for w in first..=last {
            let start = self.schedule.window_start(w);
            for off in self.reveal_rings(x, y, w) {
                let t = start + off;
                if t >= t0 && t < t1 {
                    out.push(t);
                }
            }
        }
        out
    }

    fn incident_range(&mut self, x: S, window: u64) -> Result<(usize, usize)> {
        if let Some(&(s, l)) = self.incident.get(&(x, window)) {
            return Ok((s as usize, l as usize));
        }
        let schedule = self.schedule;
        let seg = schedule.segment_for_window(window);
        let duration = schedule.window_duration(window);
        let start = self.arena.len();
        let wkey = rng::combine(self.seed, window);
        if let Some(blocks) = seg.kernel.block_rings() {
            let fault = &mut self.fault;
            blocks.incident(x, seg.rate, duration, &mut |id| fault_keyed(fault, wkey, id), &mut self.arena);
        } else {
            let mut scratch = std::mem::take(&mut self.scratch);
            scratch.clear();
            seg.kernel.neighbors(x, &mut scratch);
            let x_key = x.key();
            let (mut last_rate, mut empty) = (f64::NAN, 0.0);
            for &(y, weight) in &scratch {
                let key = self.keyed(wkey, edge_key_with(x, x_key, y));
                let rate = seg.rate * weight;
                if rate != last_rate {
                    last_rate = rate;
                    empty = (-rate * duration).exp();
                }
                let arena = &mut self.arena;
                rng::poisson_arrivals(key, rate, duration, empty, |t| arena.push((t, y)));
            }
            self.scratch = scratch;
        }
        let list = &mut self.arena[start..];
        list.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(pair) = list.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(Error::SimultaneousRings {
                time: schedule.window_start(window) + pair[0].0,
                site: format!("{x:?}"),
            });
        }
        let len = list.len();
        self.incident
            .insert((x, window), (start as u32, len as u32));
        Ok((start, len))
    }

    /// Rings touching `x` in `window` as `(offset, other endpoint)`, increasing.
    pub fn incident(&mut self, x: S, window: u64) -> Result<&[(f64, S)]> {
        let (s, l) = self.incident_range(x, window)?;
        Ok(&self.arena[s..s + l])
    }

    /// `τ_s^{-1}(z)` for `s = at⁻`: follows the rings touching the current site
    /// backwards in time, using only rings strictly before `at`, and returns
    /// the site reached at time 0.
    pub fn backward_trace(&mut self, z: S, at: Instant) -> Result<S> {
        let mut site = z;
        let mut window = at.window;
        let mut bound = at.offset;
        let mut fresh = false;
        self.path.clear();
        let result = loop {
            if fresh {
                if let Some(&hit) = self.boundary.get(&(site, window)) {
                    break hit;
                }
                self.path.push((site, window));
            }
            let (s, l) = self.incident_range(site, window)?;
            let list = &self.arena[s..s + l];
            let idx = if fresh { l } else { list.partition_point(|e| e.0 < bound) };
            if idx > 0 {
                let (t, y) = list[idx - 1];
                site = y;
                bound = t;
                fresh = false;
                continue;
            }
            if window == 0 {
                break site;
            }
            window -= 1;
            fresh = true;
        };
        for &key in &self.path {
            self.boundary.insert(key, result);
        }
        Ok(result)
    }

    /// Position at time `to` of the particle sitting at `x` at time `from`,
    /// using the rings in `(from, to]`.
    pub fn forward_trace(&mut self, x: S, from: Instant, to: Instant) -> Result<S> {
        let mut site = x;
        let mut window = from.window;
        let mut after = from.offset;
        while window <= to.window {
            let (s, l) = self.incident_range(site, window)?;
            let list = &self.arena[s..s + l];
            let idx = list.partition_point(|e| e.0 <= after);
            match list.get(idx) {
                Some(&(t, y)) if window < to.window || t <= to.offset => {
                    site = y;
                    after = t;
                }
                _ => {
                    window += 1;
                    after = f64::NEG_INFINITY;
                }
            }
        }
        Ok(site)
    }

    /// `|O_k|` for `k = 0..=n_max`, where `O_k` is the union of
    /// `τ_j^{-1}(root)` over integer `j <= k`.
    pub fn discrete_orbit_sizes(&mut self, root: S, n_max: u64) -> Result<Vec<usize>> {
        let mut sites = FxHashSet::default();
        let mut sizes = Vec::with_capacity(n_max as usize + 1);
        for k in 0..=n_max {
            let at = Instant {
                window: self.schedule.integer_window(k),
                offset: 0.0,
            };
            sites.insert(self.backward_trace(root, at)?);
            sizes.push(sites.len());
        }
        Ok(sizes)
    }

    /// The set `O_n`, sorted.
    pub fn discrete_orbit(&mut self, root: S, n: u64) -> Result<Vec<S>> {
        let mut sites = vec![root];
        for k in 1..=n {
            let at = Instant {
                window: self.schedule.integer_window(k),
                offset: 0.0,
            };
            sites.push(self.backward_trace(root, at)?);
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(sites)
    }

    /// The set `Ō_t`, sorted.
    ///
    /// The site `τ_s^{-1}(root)` only changes at rings touching `root`: if such
    /// a ring on `{root, y}` happens at `s`, the particle now at `root` was at
    /// `y` just before, so `τ_s^{-1}(root) = τ_{s-}^{-1}(y)`. Between two such
    /// rings the particle at `root` stays put. Hence `Ō_t` is `root` together
    /// with one backward trace per root-incident ring up to `t`.
    pub fn continuous_orbit(&mut self, root: S, t: f64) -> Result<Vec<S>> {
        let end = self.schedule.locate(t);
        let mut sites = vec![root];
        let mut events = Vec::new();
        for w in 0..=end.window {
            events.clear();
            events.extend(
                self.incident(root, w)?
                    .iter()
                    .filter(|e| w < end.window || e.0 <= end.offset)
                    .copied(),
            );
            for &(off, y) in &events {
                sites.push(self.backward_trace(y, Instant { window: w, offset: off })?);
            }
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(sites)
    }

    /// Sites `τ_j(root)` for integer `j <= n`, sorted and deduplicated.
    pub fn forward_orbit(&mut self, root: S, n: u64) -> Result<Vec<S>> {
        let mut sites = vec![root];
        let mut at = root;
        for j in 1..=n {
            let from = Instant {
                window: self.schedule.integer_window(j - 1),
                offset: f64::NEG_INFINITY,
            };
            let to = Instant {
                window: self.schedule.integer_window(j) - 1,
                offset: f64::INFINITY,
            };
            at = self.forward_trace(at, from, to)?;
            sites.push(at);
        }
        sites.sort_unstable();
        sites.dedup();
        Ok(sites)
    }
}

impl RingStore<'_, u32> {
    /// `τ` at instant `at` on the vertex set `0..n`, as the map
    /// `x ↦ τ(x)` from starting site to current site.
    pub fn forward_permutation(&mut self, n: usize, at: Instant) -> Result<Vec<u32>> {
        let mut rings = Vec::new();
        let mut buf = Vec::new();
        for w in 0..=at.window {
            if w == at.window && at.offset <= 0.0 {
                break;
            }
            let seg = self.schedule.segment_for_window(w);
            for x in 0..n as u32 {
                buf.clear();
                seg.kernel.neighbors(x, &mut buf);
                for &(y, _) in &buf {
                    if x < y {
                        for off in self.reveal_rings(x, y, w) {
                            if w < at.window || off < at.offset {
                                rings.push((Instant { window: w, offset: off }, x, y));
                            }
                        }
                    }
                }
            }
        }
        rings.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        if let Some(p) = rings.windows(2).find(|p| p[0].0 == p[1].0) {
            return Err(Error::SimultaneousRings {
                time: self.schedule.to_time(p[0].0),
                site: format!("{:?}", (p[0].1, p[0].2)),
            });
        }
        // occupant[z] is the starting site of the particle now at z
        let mut occupant: Vec<u32> = (0..n as u32).collect();
        for (_, x, y) in rings {
            occupant.swap(x as usize, y as usize);
        }
        let mut tau = vec![0; n];
        for (z, &x) in occupant.iter().enumerate() {
            tau[x as usize] = z as u32;
        }
        Ok(tau)
    }
}

/// One realization of an orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSample<S: Site> {
    pub sites: Vec<S>,
    pub horizon: f64,
    pub seed: u64,
}

impl<S: Site> OrbitSample<S> {
    pub fn size(&self) -> usize {
        self.sites.len()
    }
}

/// Runs `f` on a fresh store, regenerating with a derived seed after an
/// exact tie between ring times.
pub fn with_store<S: Site, T>(
    schedule: &Schedule<S>,
    seed: u64,
    mut f: impl FnMut(&mut RingStore<'_, S>) -> Result<T>,
) -> (T, u64) {
    let mut store = RingStore::new(schedule, seed);
    let mut current = seed;
    for attempt in 0..RETRIES {
        match f(&mut store) {
            Ok(v) => return (v, current),
            Err(e) => {
                log::warn!("sample seed={current}: {e}; regenerating");
                current = rng::derive(seed, attempt + 1);
                store.reset(current);
            }
        }
    }
    panic!("repeated simultaneous rings from seed {seed}; the random source is broken");
}

pub fn sample_inverted_orbit_discrete<S: Site>(schedule: &Schedule<S>, root: S, n: u64, seed: u64) -> OrbitSample<S> {
    let (sites, seed) = with_store(schedule, seed, |s| s.discrete_orbit(root, n));
    OrbitSample {
        sites,
        horizon: n as f64,
        seed,
    }
}

pub fn sample_inverted_orbit_continuous<S: Site>(schedule: &Schedule<S>, root: S, t: f64, seed: u64) -> OrbitSample<S> {
    let (sites, seed) = with_store(schedule, seed, |s| s.continuous_orbit(root, t));
    OrbitSample {
        sites,
        horizon: t,
        seed,
    }
}

/// The forward orbit `{τ_j(root) : j <= n}`, i.e. the range of the particle
/// started at `root` observed at integer times.
pub fn sample_forward_orbit<S: Site>(schedule: &Schedule<S>, root: S, n: u64, seed: u64) -> OrbitSample<S> {
    let (sites, seed) = with_store(schedule, seed, |s| s.forward_orbit(root, n));
    OrbitSample {
        sites,
        horizon: n as f64,
        seed,
    }
}

/// `τ_t` on the vertex set `0..n` of a finite graph.
pub fn forward_stirring(n: usize, schedule: &Schedule<u32>, t: f64, seed: u64) -> Vec<u32> {
    let at = schedule.locate(t);
    with_store(schedule, seed, |s| s.forward_permutation(n, at)).0
}
