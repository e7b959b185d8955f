//! Symmetric jump kernels and conductance profiles.
//!
//! A kernel is a symmetric weight function `w(x, y)` with finite per-site
//! mass. Transition kernels have mass exactly one at every site; conductance
//! profiles may have any finite mass, including zero at sites that are
//! isolated for that kernel.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::{FiniteGraph, Point, Site};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    Transition,
    Conductance,
}

pub trait Kernel<S: Site>: Send + Sync + Debug {
    fn kind(&self) -> KernelKind;

    /// Appends `(y, w(x, y))` for every `y != x` with positive weight, in a
    /// fixed order that only depends on `x`.
    fn neighbors(&self, x: S, out: &mut Vec<(S, f64)>);

    fn total_mass(&self, x: S) -> f64 {
        let mut buf = Vec::new();
        self.neighbors(x, &mut buf);
        buf.iter().map(|(_, w)| w).sum()
    }

    fn weight(&self, x: S, y: S) -> f64 {
        let mut buf = Vec::new();
        self.neighbors(x, &mut buf);
        buf.iter().find(|(z, _)| *z == y).map_or(0.0, |(_, w)| *w)
    }

    /// Picks a neighbour with probability `w(x, y) / w(x)` by inverse CDF over
    /// the `neighbors` enumeration, `u` uniform in `[0, 1)`. `None` when the
    /// site has no mass.
    fn sample_neighbor(&self, x: S, u: f64) -> Option<S> {
        let mut buf = Vec::new();
        self.neighbors(x, &mut buf);
        inverse_cdf(&buf, u)
    }

    /// Largest jump length, Euclidean on lattices and graph distance on finite graphs.
    fn support_radius(&self) -> f64;

    /// Blockwise ring generator, for kernels with many light edges per site.
    fn block_rings(&self) -> Option<&dyn BlockRings<S>> {
        None
    }

    fn describe(&self) -> String;
}

pub type SharedKernel<S> = Arc<dyn Kernel<S>>;

/// Draws the rings of a window for groups of edges at once. Every edge lies
/// in exactly one block and the rings of a block are a pure function of the
/// block's stream key, so both endpoints of an edge see the same rings.
pub trait BlockRings<S: Site>: Send + Sync + Debug {
    /// Rings in `[0, duration)` on all edges at `x` as `(offset, other end)`,
    /// in no particular order. `key` turns a block id into its stream key.
    /// An edge `{x, y}` rings at rate `rate * w(x, y)`.
    fn incident(
        &self,
        x: S,
        rate: f64,
        duration: f64,
        key: &mut dyn FnMut(u64) -> u64,
        out: &mut Vec<(f64, S)>,
    );

    /// Rings of the single edge `{x, y}`, increasing.
    fn edge(&self, x: S, y: S, rate: f64, duration: f64, key: &mut dyn FnMut(u64) -> u64, out: &mut Vec<f64>);
}

/// Jump lengths `[2^k, 2^{k+1})` of a symmetric kernel on Z.
#[derive(Clone, Debug)]
struct LengthClass {
    shift: u32,
    lengths: Vec<i64>,
    cumulative: Vec<f64>,
}

/// Block structure for translation-invariant kernels on Z. Edges `{u, u + l}`
/// with `l` in class `k` and `u` in `[b 2^k, (b + 1) 2^k)` form block `(k, b)`.
/// Its rings are one Poisson process of rate `rate * 2^k * p(class k)`, each
/// ring marked with a uniform left end and a length drawn from `p` restricted
/// to the class, which splits into independent per-edge processes of rate
/// `rate * p(l)`. A site meets at most three blocks per class.
#[derive(Clone, Debug)]
pub struct LineBlocks {
    classes: Vec<LengthClass>,
}

impl LineBlocks {
    /// Tables smaller than this are cheaper to reveal edge by edge.
    const MIN_LENGTHS: usize = 32;

    /// `table` lists `(l, p(l))` for positive lengths.
    fn new(table: &[(i64, f64)]) -> Option<Self> {
        if table.len() < Self::MIN_LENGTHS {
            return None;
        }
        let mut sorted: Vec<(i64, f64)> = table.iter().copied().filter(|&(l, w)| l > 0 && w > 0.0).collect();
        sorted.sort_by_key(|&(l, _)| l);
        let mut classes: Vec<LengthClass> = Vec::new();
        for (l, w) in sorted {
            let shift = 63 - l.leading_zeros();
            if classes.last().map_or(true, |c| c.shift != shift) {
                classes.push(LengthClass {
                    shift,
                    lengths: Vec::new(),
                    cumulative: Vec::new(),
                });
            }
            let class = classes.last_mut().expect("class pushed above");
            let acc = class.cumulative.last().copied().unwrap_or(0.0) + w;
            class.lengths.push(l);
            class.cumulative.push(acc);
        }
        Some(LineBlocks { classes })
    }

    /// Calls `f(t, u, l)` for every ring of block `(k, b)`, `t` increasing.
    fn block(
        &self,
        k: usize,
        b: i64,
        rate: f64,
        duration: f64,
        key: &mut dyn FnMut(u64) -> u64,
        mut f: impl FnMut(f64, i64, i64),
    ) {
        let class = &self.classes[k];
        let width = 1i64 << class.shift;
        let mass = *class.cumulative.last().expect("classes are non-empty");
        let total = rate * mass * width as f64;
        let stream = key(rng::combine(0x6c69_6e65_0000_0000 | class.shift as u64, b as u64));
        let marks = rng::combine(stream, 0x6d61_726b);
        let mut j = 0u64;
        rng::poisson_arrivals(stream, total, duration, (-total * duration).exp(), |t| {
            let du = (rng::unit(rng::word(marks, 2 * j)) * width as f64) as i64;
            let target = rng::unit(rng::word(marks, 2 * j + 1)) * mass;
            let i = class
                .cumulative
                .partition_point(|&c| c <= target)
                .min(class.lengths.len() - 1);
            f(t, b * width + du.min(width - 1), class.lengths[i]);
            j += 1;
        });
    }
}

fn line_point<const D: usize>(c: i64) -> Point<D> {
    let mut p = [0; D];
    p[0] = c;
    Point(p)
}

impl<const D: usize> BlockRings<Point<D>> for LineBlocks {
    fn incident(
        &self,
        x: Point<D>,
        rate: f64,
        duration: f64,
        key: &mut dyn FnMut(u64) -> u64,
        out: &mut Vec<(f64, Point<D>)>,
    ) {
        let c = x.0[0];
        for (k, class) in self.classes.iter().enumerate() {
            let width = 1i64 << class.shift;
            let (lo, hi) = (class.lengths[0], class.lengths[class.lengths.len() - 1]);
            self.block(k, c.div_euclid(width), rate, duration, key, |t, u, l| {
                if u == c {
                    out.push((t, line_point(c + l)));
                }
            });
            for b in (c - hi).div_euclid(width)..=(c - lo).div_euclid(width) {
                self.block(k, b, rate, duration, key, |t, u, l| {
                    if u + l == c {
                        out.push((t, line_point(u)));
                    }
                });
            }
        }
    }

    fn edge(
        &self,
        x: Point<D>,
        y: Point<D>,
        rate: f64,
        duration: f64,
        key: &mut dyn FnMut(u64) -> u64,
        out: &mut Vec<f64>,
    ) {
        if x.0[1..] != y.0[1..] {
            return;
        }
        let (u, l) = (x.0[0].min(y.0[0]), (x.0[0] - y.0[0]).abs());
        if l == 0 {
            return;
        }
        let shift = 63 - l.leading_zeros();
        let Some(k) = self.classes.iter().position(|c| c.shift == shift) else {
            return;
        };
        let width = 1i64 << shift;
        self.block(k, u.div_euclid(width), rate, duration, key, |t, v, m| {
            if v == u && m == l {
                out.push(t);
            }
        });
    }
}

fn inverse_cdf<S: Copy>(list: &[(S, f64)], u: f64) -> Option<S> {
    let total: f64 = list.iter().map(|(_, w)| w).sum();
    if list.is_empty() || total <= 0.0 {
        return None;
    }
    let target = u * total;
    let mut acc = 0.0;
    for (y, w) in list {
        acc += w;
        if target < acc {
            return Some(*y);
        }
    }
    list.iter().rev().find(|(_, w)| *w > 0.0).map(|(y, _)| *y)
}

/// Translation-invariant kernel on Z^D given by a table of jump offsets.
#[derive(Clone, Debug)]
pub struct OffsetKernel<const D: usize> {
    offsets: Vec<([i64; D], f64)>,
    cumulative: Vec<f64>,
    blocks: Option<LineBlocks>,
    kind: KernelKind,
    radius: f64,
    label: String,
}

impl<const D: usize> OffsetKernel<D> {
    fn from_table(offsets: Vec<([i64; D], f64)>, kind: KernelKind, radius: f64, label: String) -> Self {
        let mut acc = 0.0;
        let cumulative = offsets
            .iter()
            .map(|(_, w)| {
                acc += w;
                acc
            })
            .collect();
        let blocks = if D == 1 {
            let positive: Vec<(i64, f64)> = offsets.iter().filter(|(o, _)| o[0] > 0).map(|(o, w)| (o[0], *w)).collect();
            LineBlocks::new(&positive)
        } else {
            None
        };
        OffsetKernel {
            offsets,
            cumulative,
            blocks,
            kind,
            radius,
            label,
        }
    }

    fn unit_offsets() -> Vec<[i64; D]> {
        let mut out = Vec::with_capacity(2 * D);
        for axis in 0..D {
            for sign in [1, -1] {
                let mut o = [0; D];
                o[axis] = sign;
                out.push(o);
            }
        }
        out
    }

    /// `p(x, y) = 1/(2d)` on nearest neighbours.
    pub fn nearest_neighbor() -> Result<Self> {
        if D == 0 {
            return Err(Error::ZeroDimension);
        }
        let w = 1.0 / (2 * D) as f64;
        let table = Self::unit_offsets().into_iter().map(|o| (o, w)).collect();
        Ok(Self::from_table(
            table,
            KernelKind::Transition,
            1.0,
            format!("nearest-neighbor(d={D})"),
        ))
    }

    /// Unit conductance on every nearest-neighbour edge.
    pub fn unit_conductance() -> Result<Self> {
        if D == 0 {
            return Err(Error::ZeroDimension);
        }
        let table = Self::unit_offsets().into_iter().map(|o| (o, 1.0)).collect();
        Ok(Self::from_table(
            table,
            KernelKind::Conductance,
            1.0,
            format!("unit-conductance(d={D})"),
        ))
    }

    /// `p(x, y) ∝ |x - y|^-(d + alpha)` for `0 < |x - y| <= r_trunc`, normalised
    /// exactly over the truncated support. Truncation removes far jumps, which
    /// biases the walk towards recurrence.
    pub fn long_range(alpha: f64, r_trunc: f64) -> Result<Self> {
        if D == 0 {
            return Err(Error::ZeroDimension);
        }
        if !(1..=2).contains(&D) {
            return Err(Error::invalid("d", "long-range kernels support d = 1 or 2"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(r_trunc >= 2.0) {
            return Err(Error::invalid("r_trunc", format!("must be at least 2, got {r_trunc}")));
        }
        let r = r_trunc.floor() as i64;
        let count_estimate = if D == 1 { 2 * r as usize } else { 4 * (r as usize).pow(2) };
        const MAX_TABLE: usize = 20_000_000;
        if count_estimate > MAX_TABLE {
            return Err(Error::SizeLimit {
                what: "long-range offset table",
                value: count_estimate,
                limit: MAX_TABLE,
            });
        }
        let r2_max = r_trunc * r_trunc;
        let exponent = -(D as f64 + alpha) / 2.0;
        let mut raw = Vec::new();
        let mut visit = |o: [i64; D]| {
            let sq: i64 = o.iter().map(|c| c * c).sum();
            if sq > 0 && (sq as f64) <= r2_max {
                raw.push((o, (sq as f64).powf(exponent)));
            }
        };
        if D == 1 {
            for a in -r..=r {
                let mut o = [0; D];
                o[0] = a;
                visit(o);
            }
        } else {
            for a in -r..=r {
                for b in -r..=r {
                    let mut o = [0; D];
                    o[0] = a;
                    o[1] = b;
                    visit(o);
                }
            }
        }
        // sum in order of increasing distance so the normaliser is reproducible
        // and dominated terms are added last
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&i, &j| raw[j].1.total_cmp(&raw[i].1).then(raw[i].0.cmp(&raw[j].0)));
        let z: f64 = order.iter().map(|&i| raw[i].1).sum();
        let table = order.into_iter().map(|i| (raw[i].0, raw[i].1 / z)).collect();
        Ok(Self::from_table(
            table,
            KernelKind::Transition,
            r_trunc,
            format!("long-range(d={D},alpha={alpha},r_trunc={r_trunc},truncation-bias=toward-recurrence)"),
        ))
    }

    /// Total weight of jumps longer than `distance`.
    pub fn tail_mass(&self, distance: f64) -> f64 {
        let d2 = distance * distance;
        self.offsets
            .iter()
            .filter(|(o, _)| o.iter().map(|c| (c * c) as f64).sum::<f64>() > d2)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn offsets(&self) -> &[([i64; D], f64)] {
        &self.offsets
    }
}

impl<const D: usize> Kernel<Point<D>> for OffsetKernel<D> {
    fn kind(&self) -> KernelKind {
        self.kind
    }

    fn neighbors(&self, x: Point<D>, out: &mut Vec<(Point<D>, f64)>) {
        out.extend(self.offsets.iter().map(|(o, w)| (x.shift(o), *w)));
    }

    fn total_mass(&self, _x: Point<D>) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn weight(&self, x: Point<D>, y: Point<D>) -> f64 {
        let mut o = [0; D];
        for i in 0..D {
            o[i] = y.0[i] - x.0[i];
        }
        self.offsets
            .iter()
            .find(|(p, _)| *p == o)
            .map_or(0.0, |(_, w)| *w)
    }

    fn sample_neighbor(&self, x: Point<D>, u: f64) -> Option<Point<D>> {
        let total = *self.cumulative.last()?;
        let target = u * total;
        let i = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.offsets.len() - 1);
        Some(x.shift(&self.offsets[i].0))
    }

    fn support_radius(&self) -> f64 {
        self.radius
    }

    fn block_rings(&self) -> Option<&dyn BlockRings<Point<D>>> {
        self.blocks.as_ref().map(|b| b as &dyn BlockRings<Point<D>>)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// Nearest-neighbour conductances `1/(2D)` on the slab
/// `Z^{D-1} × {0, …, width - 1}`; the last coordinate is the finite one.
/// Sites on the two faces have no edges leaving the slab, so the mass is
/// below one there.
#[derive(Clone, Debug)]
pub struct SlabKernel<const D: usize> {
    width: i64,
}

impl<const D: usize> SlabKernel<D> {
    pub fn new(width: u64) -> Result<Self> {
        if D < 2 {
            return Err(Error::invalid("dim", "a slab needs at least one infinite and one finite axis"));
        }
        if width == 0 || width > i64::MAX as u64 {
            return Err(Error::invalid("width", format!("must be positive, got {width}")));
        }
        Ok(SlabKernel { width: width as i64 })
    }

    pub fn contains(&self, x: &Point<D>) -> bool {
        (0..self.width).contains(&x.0[D - 1])
    }
}

impl<const D: usize> Kernel<Point<D>> for SlabKernel<D> {
    fn kind(&self) -> KernelKind {
        KernelKind::Conductance
    }

    fn neighbors(&self, x: Point<D>, out: &mut Vec<(Point<D>, f64)>) {
        if !self.contains(&x) {
            return;
        }
        let w = 1.0 / (2 * D) as f64;
        for o in OffsetKernel::<D>::unit_offsets() {
            let y = x.shift(&o);
            if self.contains(&y) {
                out.push((y, w));
            }
        }
    }

    fn weight(&self, x: Point<D>, y: Point<D>) -> f64 {
        if x.l1(&y) == 1 && self.contains(&x) && self.contains(&y) {
            1.0 / (2 * D) as f64
        } else {
            0.0
        }
    }

    fn support_radius(&self) -> f64 {
        1.0
    }

    fn describe(&self) -> String {
        format!("slab(Z^{} x {{0..{}}})", D - 1, self.width - 1)
    }
}

/// Which half of the cube partition of the nearest-neighbour edges of Z^d.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeClass {
    /// Edges inside a cube `2n + {0,1}^d`.
    Inner,
    /// All remaining nearest-neighbour edges.
    Outer,
}

/// Class of a nearest-neighbour edge; `None` when `x`, `y` are not neighbours.
pub fn cube_class<const D: usize>(x: &Point<D>, y: &Point<D>) -> Option<CubeClass> {
    if x.l1(y) != 1 {
        return None;
    }
    let axis = (0..D).find(|&i| x.0[i] != y.0[i])?;
    let low = x.0[axis].min(y.0[axis]);
    Some(if low.rem_euclid(2) == 0 {
        CubeClass::Inner
    } else {
        CubeClass::Outer
    })
}

/// `p_i(x, y) = (1/d) 1{x ~ y in E_i}` for one class of the cube partition.
/// Each site has exactly one partner per axis in each class, so both halves
/// are transition kernels.
#[derive(Clone, Debug)]
pub struct CubeKernel<const D: usize> {
    class: CubeClass,
    weight: f64,
}

impl<const D: usize> CubeKernel<D> {
    pub fn class(&self) -> CubeClass {
        self.class
    }

    #[inline]
    fn partner(&self, x: &Point<D>, axis: usize) -> Point<D> {
        let even = x.0[axis].rem_euclid(2) == 0;
        let up = match self.class {
            CubeClass::Inner => even,
            CubeClass::Outer => !even,
        };
        let mut o = [0; D];
        o[axis] = if up { 1 } else { -1 };
        x.shift(&o)
    }
}

/// Splits the nearest-neighbour edges of Z^d into the cube-interior class
/// and its complement.
pub fn cube_edge_partition<const D: usize>() -> Result<(CubeKernel<D>, CubeKernel<D>)> {
    if D == 0 {
        return Err(Error::ZeroDimension);
    }
    let weight = 1.0 / D as f64;
    Ok((
        CubeKernel {
            class: CubeClass::Inner,
            weight,
        },
        CubeKernel {
            class: CubeClass::Outer,
            weight,
        },
    ))
}

impl<const D: usize> Kernel<Point<D>> for CubeKernel<D> {
    fn kind(&self) -> KernelKind {
        KernelKind::Transition
    }

    fn neighbors(&self, x: Point<D>, out: &mut Vec<(Point<D>, f64)>) {
        for axis in 0..D {
            out.push((self.partner(&x, axis), self.weight));
        }
    }

    fn total_mass(&self, _x: Point<D>) -> f64 {
        self.weight * D as f64
    }

    fn weight(&self, x: Point<D>, y: Point<D>) -> f64 {
        if cube_class(&x, &y) == Some(self.class) {
            self.weight
        } else {
            0.0
        }
    }

    fn sample_neighbor(&self, x: Point<D>, u: f64) -> Option<Point<D>> {
        let axis = ((u * D as f64) as usize).min(D - 1);
        Some(self.partner(&x, axis))
    }

    fn support_radius(&self) -> f64 {
        1.0
    }

    fn describe(&self) -> String {
        let name = match self.class {
            CubeClass::Inner => "cube-inner",
            CubeClass::Outer => "cube-outer",
        };
        format!("{name}(d={D})")
    }
}

/// Conductances on the edges of a finite graph.
#[derive(Clone, Debug)]
pub struct EdgeWeights {
    adj: Vec<Vec<(u32, f64)>>,
    kind: KernelKind,
    label: String,
}

impl EdgeWeights {
    /// `weights` lists `(u, v, c(u, v))`; each value is stored once and shared
    /// by both endpoints.
    pub fn new(n: usize, weights: impl IntoIterator<Item = (u32, u32, f64)>, label: impl Into<String>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v, w) in weights {
            if u as usize >= n || v as usize >= n || u == v {
                return Err(Error::invalid("edge", format!("bad edge {{{u}, {v}}}")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::invalid("weight", format!("{w} on {{{u}, {v}}}")));
            }
            if w > 0.0 {
                adj[u as usize].push((v, w));
                adj[v as usize].push((u, w));
            }
        }
        Ok(EdgeWeights {
            adj,
            kind: KernelKind::Conductance,
            label: label.into(),
        })
    }

    pub fn uniform(g: &FiniteGraph, w: f64) -> Self {
        Self::new(
            g.vertex_count(),
            g.edges().iter().map(|&(u, v)| (u, v, w)),
            format!("uniform-conductance({w})"),
        )
        .expect("graph edges are valid")
    }

    pub fn unit(g: &FiniteGraph) -> Self {
        Self::uniform(g, 1.0)
    }

    /// Unit conductance on the listed edges only.
    pub fn on_edges(n: usize, edges: &[(u32, u32)], label: impl Into<String>) -> Self {
        Self::new(n, edges.iter().map(|&(u, v)| (u, v, 1.0)), label).expect("valid edges")
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }
}

impl Kernel<u32> for EdgeWeights {
    fn kind(&self) -> KernelKind {
        self.kind
    }

    fn neighbors(&self, x: u32, out: &mut Vec<(u32, f64)>) {
        out.extend_from_slice(&self.adj[x as usize]);
    }

    fn total_mass(&self, x: u32) -> f64 {
        self.adj[x as usize].iter().map(|(_, w)| w).sum()
    }

    fn sample_neighbor(&self, x: u32, u: f64) -> Option<u32> {
        inverse_cdf(&self.adj[x as usize], u)
    }

    fn support_radius(&self) -> f64 {
        1.0
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

/// The zero kernel: nothing ever moves.
#[derive(Clone, Copy, Debug, Default)]
pub struct Edgeless;

impl<S: Site> Kernel<S> for Edgeless {
    fn kind(&self) -> KernelKind {
        KernelKind::Conductance
    }

    fn neighbors(&self, _x: S, _out: &mut Vec<(S, f64)>) {}

    fn total_mass(&self, _x: S) -> f64 {
        0.0
    }

    fn support_radius(&self) -> f64 {
        0.0
    }

    fn describe(&self) -> String {
        "edgeless".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn slab_faces_lose_edges() {
        let k = SlabKernel::<3>::new(3).unwrap();
        let mut buf = Vec::new();
        for (z, want) in [(0, 5), (1, 6), (2, 5), (3, 0), (-1, 0)] {
            buf.clear();
            k.neighbors(Point([4, -2, z]), &mut buf);
            assert_eq!(buf.len(), want, "layer {z}");
            for &(y, w) in &buf {
                assert_eq!(k.weight(y, Point([4, -2, z])), w);
            }
        }
        let thin = SlabKernel::<2>::new(1).unwrap();
        assert_eq!(Kernel::total_mass(&thin, Point([0, 0])), 0.5);
        assert!(SlabKernel::<1>::new(2).is_err());
        assert!(SlabKernel::<2>::new(0).is_err());
    }

    #[test]
    fn nearest_neighbor_weights() {
        let k = OffsetKernel::<3>::nearest_neighbor().unwrap();
        assert_eq!(k.weight(Point([0, 0, 0]), Point([1, 0, 0])), 1.0 / 6.0);
        assert_eq!(k.weight(Point([0, 0, 0]), Point([0, 0, 0])), 0.0);
        let k1 = OffsetKernel::<1>::nearest_neighbor().unwrap();
        assert_eq!(Kernel::<Point<1>>::total_mass(&k1, Point([5])), 1.0);
        assert_eq!(OffsetKernel::<0>::nearest_neighbor().unwrap_err(), Error::ZeroDimension);
    }

    #[test]
    fn long_range_normalisation_by_hand() {
        // weights 1 at distance 1 and 1/4 at distance 2 on each side: Z = 2.5
        let k = OffsetKernel::<1>::long_range(1.0, 2.0).unwrap();
        let w1 = k.weight(Point([0]), Point([1]));
        assert!((w1 - 0.4).abs() < 1e-15);
        assert!((k.weight(Point([0]), Point([-2])) - 0.1).abs() < 1e-15);
        let mut buf = Vec::new();
        k.neighbors(Point([7]), &mut buf);
        let mass: f64 = buf.iter().map(|(_, w)| w).sum();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn long_range_rejects_bad_parameters() {
        assert!(OffsetKernel::<1>::long_range(0.0, 10.0).is_err());
        assert!(OffsetKernel::<1>::long_range(1.0, 1.5).is_err());
        assert!(OffsetKernel::<3>::long_range(1.0, 10.0).is_err());
    }

    #[test]
    fn heavier_tail_for_smaller_alpha() {
        // independent oracle: direct summation of the truncated series
        let tail = |alpha: f64| {
            let z: f64 = (1..=100).map(|r| 2.0 * (r as f64).powf(-1.0 - alpha)).sum();
            (51..=100).map(|r| 2.0 * (r as f64).powf(-1.0 - alpha)).sum::<f64>() / z
        };
        let a = OffsetKernel::<1>::long_range(0.5, 100.0).unwrap();
        let b = OffsetKernel::<1>::long_range(1.5, 100.0).unwrap();
        assert!((a.tail_mass(50.0) - tail(0.5)).abs() < 1e-12);
        assert!((b.tail_mass(50.0) - tail(1.5)).abs() < 1e-12);
        assert!(a.tail_mass(50.0) > b.tail_mass(50.0));
    }

    #[test]
    fn long_range_two_dimensional_mass() {
        let k = OffsetKernel::<2>::long_range(1.0, 5.0).unwrap();
        let mut buf = Vec::new();
        k.neighbors(Point([3, -4]), &mut buf);
        assert!((buf.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(buf.iter().all(|(y, _)| y.euclid(&Point([3, -4])) <= 5.0));
    }

    #[test]
    fn cube_partition_by_hand() {
        assert_eq!(cube_class(&Point([0]), &Point([1])), Some(CubeClass::Inner));
        assert_eq!(cube_class(&Point([1]), &Point([2])), Some(CubeClass::Outer));
        let (p1, p2) = cube_edge_partition::<2>().unwrap();
        assert_eq!(p1.weight(Point([0, 0]), Point([0, 1])), 0.5);
        assert_eq!(p2.weight(Point([0, 0]), Point([0, 1])), 0.0);
        assert_eq!(p2.weight(Point([0, 1]), Point([0, 2])), 0.5);
        assert_eq!(Kernel::<Point<2>>::total_mass(&p1, Point([3, 8])), 1.0);
    }

    #[test]
    fn inverse_cdf_sampling_matches_weights() {
        let g = FiniteGraph::new(3, [(0, 1), (0, 2)]).unwrap();
        let k = EdgeWeights::new(3, [(0, 1, 1.0), (0, 2, 3.0)], "w").unwrap();
        assert_eq!(g.degree(0), 2);
        let key = rng::combine(1, 2);
        let n = 40_000;
        let hits = (0..n)
            .filter(|&i| k.sample_neighbor(0, rng::unit(rng::word(key, i))) == Some(2))
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.75).abs() < 4.0 * (0.75 * 0.25 / n as f64).sqrt());
        assert_eq!(Kernel::<u32>::sample_neighbor(&Edgeless, 0, 0.3), None);
    }

    #[test]
    fn offset_sampler_agrees_with_enumeration() {
        let k = OffsetKernel::<1>::long_range(0.7, 30.0).unwrap();
        let mut buf = Vec::new();
        k.neighbors(Point([0]), &mut buf);
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            assert_eq!(k.sample_neighbor(Point([0]), u), inverse_cdf(&buf, u));
        }
    }

    fn nn_pair<const D: usize>(coords: [i64; D], axis: usize, up: bool) -> (Point<D>, Point<D>) {
        let x = Point(coords);
        let mut o = [0; D];
        o[axis % D] = if up { 1 } else { -1 };
        (x, x.shift(&o))
    }

    fn check_partition<const D: usize>(x: Point<D>, y: Point<D>) {
        let (p1, p2) = cube_edge_partition::<D>().unwrap();
        let (a, b) = (p1.weight(x, y), p2.weight(x, y));
        assert!((a > 0.0) ^ (b > 0.0));
        assert_eq!(a + b, 1.0 / D as f64);
        assert_eq!(a, p1.weight(y, x));
        assert_eq!(b, p2.weight(y, x));
    }

    proptest! {
        #[test]
        fn cube_partition_is_exclusive(c in prop::array::uniform4(-1000i64..1000), axis in 0usize..4, up: bool) {
            let (x, y) = nn_pair([c[0]], axis, up);
            check_partition(x, y);
            let (x, y) = nn_pair([c[0], c[1]], axis, up);
            check_partition(x, y);
            let (x, y) = nn_pair([c[0], c[1], c[2]], axis, up);
            check_partition(x, y);
            let (x, y) = nn_pair(c, axis, up);
            check_partition(x, y);
        }

        #[test]
        fn lattice_kernels_are_symmetric(a in -500i64..500, b in -500i64..500, alpha in 0.1f64..3.0) {
            let k = OffsetKernel::<1>::long_range(alpha, 40.0).unwrap();
            let (x, y) = (Point([a]), Point([b]));
            prop_assert_eq!(k.weight(x, y).to_bits(), k.weight(y, x).to_bits());
            let k2 = OffsetKernel::<2>::long_range(alpha, 6.0).unwrap();
            let (x, y) = (Point([a, b]), Point([a + (b % 5), b - (a % 4)]));
            prop_assert_eq!(k2.weight(x, y).to_bits(), k2.weight(y, x).to_bits());
        }
    }
}
