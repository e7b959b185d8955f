//! Vertex types and finite graphs.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// A vertex of some graph. `key` is a stable 64-bit encoding used to key
/// the per-edge random streams, so it must not depend on process state.
pub trait Site: Copy + Eq + Ord + Hash + Debug + Send + Sync + 'static {
    fn key(&self) -> u64;

    /// The distinguished root vertex.
    fn origin() -> Self;
}

impl Site for u32 {
    #[inline]
    fn key(&self) -> u64 {
        rng::mix64(*self as u64 ^ 0x00f1_0000_0000_0000)
    }

    fn origin() -> Self {
        0
    }
}

/// A site of the lattice Z^D.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Point<const D: usize>(pub [i64; D]);

impl<const D: usize> Point<D> {
    pub const ORIGIN: Self = Point([0; D]);

    /// Translate by `offset`. Coordinates are signed 64-bit and overflow is
    /// treated as a hard error rather than wrapping around.
    #[inline]
    pub fn shift(self, offset: &[i64; D]) -> Self {
        let mut out = self.0;
        for (c, o) in out.iter_mut().zip(offset) {
            *c = c.checked_add(*o).expect("lattice coordinate overflow");
        }
        Point(out)
    }

    pub fn euclid_sq(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| {
                let d = (*a - *b) as f64;
                d * d
            })
            .sum()
    }

    pub fn euclid(&self, other: &Self) -> f64 {
        self.euclid_sq(other).sqrt()
    }

    /// Graph distance in the nearest-neighbour lattice.
    pub fn l1(&self, other: &Self) -> u64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.euclid(&Self::ORIGIN)
    }
}

impl<const D: usize> Site for Point<D> {
    #[inline]
    fn key(&self) -> u64 {
        let mut h = 0x1a77_1ce5_0000_0000 ^ D as u64;
        for c in &self.0 {
            h = (h.rotate_left(29) ^ *c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        }
        rng::mix64(h)
    }

    fn origin() -> Self {
        Self::ORIGIN
    }
}

/// A finite simple graph on vertices `0..n`. The edge list keeps the order
/// in which edges were given; each edge is stored as `(min, max)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteGraph {
    n: usize,
    adj: Vec<Vec<u32>>,
    edges: Vec<(u32, u32)>,
}

impl FiniteGraph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        let mut list = Vec::new();
        for (u, v) in edges {
            if u as usize >= n || v as usize >= n {
                return Err(Error::invalid(
                    "edge",
                    format!("{{{u}, {v}}} references a vertex outside 0..{n}"),
                ));
            }
            if u == v {
                return Err(Error::invalid("edge", format!("self-loop at {u}")));
            }
            let e = (u.min(v), u.max(v));
            if adj[e.0 as usize].contains(&e.1) {
                return Err(Error::invalid("edge", format!("duplicate edge {{{u}, {v}}}")));
            }
            adj[e.0 as usize].push(e.1);
            adj[e.1 as usize].push(e.0);
            list.push(e);
        }
        Ok(FiniteGraph {
            n,
            adj,
            edges: list,
        })
    }

    pub fn edgeless(n: usize) -> Self {
        FiniteGraph::new(n, []).expect("edgeless graph")
    }

    pub fn path(n: usize) -> Self {
        FiniteGraph::new(n, (1..n as u32).map(|i| (i - 1, i))).expect("path graph")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least 3 vertices");
        FiniteGraph::new(n, (0..n as u32).map(|i| (i, (i + 1) % n as u32))).expect("cycle graph")
    }

    pub fn complete(n: usize) -> Self {
        let n32 = n as u32;
        FiniteGraph::new(n, (0..n32).flat_map(|i| (i + 1..n32).map(move |j| (i, j))))
            .expect("complete graph")
    }

    /// Parses the plain-text edge-list format: a `vertices <n>` header, then
    /// one `u v` pair per line with 0-based indices. `#` starts a comment.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let body = raw.split('#').next().unwrap_or("");
            let mut fields = body.split_whitespace();
            let Some(first) = fields.next() else { continue };
            let column = raw.find(first).unwrap_or(0) + 1;
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                column,
                message,
            };
            match n {
                None => {
                    if first != "vertices" {
                        return Err(parse_err("expected `vertices <n>` header".into()));
                    }
                    let count = fields
                        .next()
                        .and_then(|s| s.parse::<usize>().ok())
                        .ok_or_else(|| parse_err("vertex count must be a non-negative integer".into()))?;
                    n = Some(count);
                }
                Some(_) => {
                    let u = first.parse::<u32>();
                    let v = fields.next().map(str::parse::<u32>);
                    match (u, v, fields.next()) {
                        (Ok(u), Some(Ok(v)), None) => edges.push((u, v)),
                        _ => return Err(parse_err(format!("expected `u v`, got `{}`", body.trim()))),
                    }
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 1,
            column: 1,
            message: "missing `vertices <n>` header".into(),
        })?;
        FiniteGraph::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut s = format!("vertices {}\n", self.n);
        for (u, v) in &self.edges {
            s.push_str(&format!("{u} {v}\n"));
        }
        s
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, x: u32) -> &[u32] {
        &self.adj[x as usize]
    }

    pub fn degree(&self, x: u32) -> usize {
        self.adj[x as usize].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: u32, v: u32) -> bool {
        self.adj[u as usize].contains(&v)
    }

    pub fn check_degree_bound(&self, h: usize) -> Result<()> {
        for (x, a) in self.adj.iter().enumerate() {
            if a.len() > h {
                return Err(Error::DegreeBound {
                    vertex: x as u32,
                    degree: a.len(),
                    bound: h,
                });
            }
        }
        Ok(())
    }

    /// BFS distances from `x`; unreachable vertices get `u32::MAX`.
    pub fn distances_from(&self, x: u32) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = VecDeque::new();
        dist[x as usize] = 0;
        queue.push_back(x);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = dist[u as usize] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.distances_from(0).iter().all(|&d| d != u32::MAX)
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.is_connected() {
            Ok(())
        } else {
            Err(Error::Disconnected)
        }
    }

    /// All-pairs graph distance, row-major.
    pub fn distance_matrix(&self) -> Vec<Vec<u32>> {
        (0..self.n as u32).map(|x| self.distances_from(x)).collect()
    }

    /// A random connected graph with maximum degree at most `h` (h >= 2):
    /// a degree-capped random tree plus up to `extra` random chords.
    pub fn random_bounded_degree<R: Rng>(n: usize, h: usize, extra: usize, rng: &mut R) -> Self {
        assert!(h >= 2 || n <= 2, "need h >= 2 to connect more than two vertices");
        let mut deg = vec![0usize; n];
        let mut edges = Vec::new();
        let mut open: Vec<u32> = Vec::new();
        for v in 0..n as u32 {
            if v > 0 {
                let i = rng.random_range(0..open.len());
                let u = open[i];
                edges.push((u, v));
                deg[u as usize] += 1;
                deg[v as usize] += 1;
                if deg[u as usize] >= h {
                    open.swap_remove(i);
                }
            }
            if deg[v as usize] < h {
                open.push(v);
            }
        }
        let mut present: rustc_hash::FxHashSet<(u32, u32)> = edges.iter().copied().collect();
        let mut attempts = 0;
        let mut added = 0;
        while added < extra && attempts < 20 * extra + 100 && open.len() >= 2 {
            attempts += 1;
            let i = rng.random_range(0..open.len());
            let j = rng.random_range(0..open.len());
            let (u, v) = (open[i].min(open[j]), open[i].max(open[j]));
            if u == v || present.contains(&(u, v)) {
                continue;
            }
            present.insert((u, v));
            edges.push((u, v));
            added += 1;
            deg[u as usize] += 1;
            deg[v as usize] += 1;
            open.retain(|&w| deg[w as usize] < h);
        }
        edges.shuffle(rng);
        FiniteGraph::new(n, edges).expect("generated graph is simple")
    }

    /// A uniform-ish random connected `k`-regular graph (pairing model with restarts).
    pub fn random_regular<R: Rng>(n: usize, k: usize, rng: &mut R) -> Self {
        assert!(n * k % 2 == 0 && k < n, "no {k}-regular graph on {n} vertices");
        loop {
            let mut stubs: Vec<u32> = (0..n as u32).flat_map(|v| std::iter::repeat_n(v, k)).collect();
            stubs.shuffle(rng);
            let mut seen = rustc_hash::FxHashSet::default();
            let mut ok = true;
            for pair in stubs.chunks(2) {
                let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
                if u == v || !seen.insert((u, v)) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let g = FiniteGraph::new(n, seen.into_iter().collect::<Vec<_>>());
            if let Ok(mut g) = g {
                // the hash set scrambles order; fix a canonical one
                g.edges.sort_unstable();
                if g.is_connected() {
                    return g;
                }
            }
        }
    }

    /// All connected labelled graphs on `m` vertices.
    pub fn all_connected(m: usize) -> Vec<FiniteGraph> {
        let pairs: Vec<(u32, u32)> = (0..m as u32)
            .flat_map(|i| (i + 1..m as u32).map(move |j| (i, j)))
            .collect();
        (0u32..1 << pairs.len())
            .map(|mask| {
                FiniteGraph::new(
                    m,
                    pairs
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask >> i & 1 == 1)
                        .map(|(_, e)| *e),
                )
                .expect("subgraph of complete graph")
            })
            .filter(FiniteGraph::is_connected)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_edge_list_with_comments() {
        let g = FiniteGraph::parse_edge_list("# path\nvertices 4\n0 1\n1 2 # middle\n\n2 3\n").unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edges(), &[(0, 1), (1, 2), (2, 3)]);
        assert_eq!(FiniteGraph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn edge_list_errors_carry_position() {
        let err = FiniteGraph::parse_edge_list("vertices 3\n0 1\n  1 x\n").unwrap_err();
        assert_eq!(
            err,
            Error::Parse {
                line: 3,
                column: 3,
                message: "expected `u v`, got `1 x`".into()
            }
        );
        assert!(matches!(
            FiniteGraph::parse_edge_list("0 1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(FiniteGraph::parse_edge_list("vertices 2\n0 5\n").is_err());
    }

    #[test]
    fn rejects_loops_and_duplicates() {
        assert!(FiniteGraph::new(3, [(1, 1)]).is_err());
        assert!(FiniteGraph::new(3, [(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn small_graph_facts() {
        let c = FiniteGraph::cycle(5);
        assert!(c.is_connected());
        assert_eq!(c.max_degree(), 2);
        assert_eq!(c.distances_from(0), vec![0, 1, 2, 2, 1]);
        assert!(!FiniteGraph::edgeless(3).is_connected());
        assert_eq!(FiniteGraph::complete(4).edges().len(), 6);
        // labelled connected graphs: 1, 1, 4, 38 for m = 1..4
        assert_eq!(FiniteGraph::all_connected(3).len(), 4);
        assert_eq!(FiniteGraph::all_connected(4).len(), 38);
    }

    #[test]
    fn random_graphs_respect_bounds() {
        let mut r = rng::stream(3);
        for h in 2..=6 {
            let g = FiniteGraph::random_bounded_degree(200, h, 300, &mut r);
            assert!(g.is_connected());
            g.check_degree_bound(h).unwrap();
        }
        let g = FiniteGraph::random_regular(50, 3, &mut r);
        assert!((0..50).all(|v| g.degree(v) == 3));
        assert!(g.is_connected());
    }

    #[test]
    fn point_metrics() {
        let a = Point([1, -2, 2]);
        assert_eq!(a.norm(), 3.0);
        assert_eq!(a.l1(&Point::ORIGIN), 5);
        assert_eq!(a.shift(&[-1, 2, -2]), Point::ORIGIN);
        assert_ne!(a.key(), Point([1, 2, -2]).key());
    }

    #[test]
    #[should_panic(expected = "overflow")]
    fn coordinate_overflow_is_an_error() {
        Point([i64::MAX]).shift(&[1]);
    }
}
