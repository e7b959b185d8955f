//! Graphs, kernels and schedules named by a config section.

use std::sync::Arc;

use stir_core::constructions::{build_graph_cutoff, build_zd_cutoff};
use stir_core::{lattice_resistance, EdgeWeights, Edgeless, FiniteGraph, OffsetKernel, Point, Schedule, SharedKernel, SlabKernel};

use crate::config::Section;
use crate::RunError;

pub struct Lattice<const D: usize> {
    pub schedule: Schedule<Point<D>>,
    /// Conductances `p(x, y)` of a homogeneous kernel, for resistance bounds.
    pub conductances: Option<SharedKernel<Point<D>>>,
    pub lambda: f64,
    pub frozen: bool,
}

impl<const D: usize> Lattice<D> {
    pub fn resistance(&self, radius: f64) -> Option<f64> {
        self.conductances.as_ref().map(|k| lattice_resistance(k.as_ref(), radius))
    }
}

pub struct Finite {
    pub graph: FiniteGraph,
    pub schedule: Schedule<u32>,
    pub lambda: f64,
}

pub enum Model {
    L1(Lattice<1>),
    L2(Lattice<2>),
    L3(Lattice<3>),
    L4(Lattice<4>),
    Finite(Finite),
}

impl Model {
    pub fn describe(&self) -> String {
        match self {
            Model::L1(l) => format!("Z^1 {}", describe_schedule(&l.schedule)),
            Model::L2(l) => format!("Z^2 {}", describe_schedule(&l.schedule)),
            Model::L3(l) => format!("Z^3 {}", describe_schedule(&l.schedule)),
            Model::L4(l) => format!("Z^4 {}", describe_schedule(&l.schedule)),
            Model::Finite(f) => format!(
                "graph on {} vertices, {} edges, {}",
                f.graph.vertex_count(),
                f.graph.edges().len(),
                describe_schedule(&f.schedule)
            ),
        }
    }
}

fn describe_schedule<S: stir_core::Site>(s: &Schedule<S>) -> String {
    let segs: Vec<String> = s
        .segments()
        .iter()
        .map(|g| format!("{}@{}x{}", g.kernel.describe(), g.rate, g.duration))
        .collect();
    segs.join(" ; ")
}

/// Reads the graph description of a section.
pub fn graph(sec: &Section, config_dir: &std::path::Path) -> Result<Option<FiniteGraph>, RunError> {
    let kind = sec.str_or("graph", "lattice");
    let count = |sec: &Section| -> Result<usize, RunError> { Ok(sec.require_u64("vertices")? as usize) };
    let g = match kind {
        "lattice" => return Ok(None),
        "path" => FiniteGraph::path(count(sec)?),
        "cycle" => {
            let n = count(sec)?;
            if n < 3 {
                return Err(sec.invalid("vertices", "a cycle needs at least 3 vertices"));
            }
            FiniteGraph::cycle(n)
        }
        "complete" => FiniteGraph::complete(count(sec)?),
        "edgeless" => FiniteGraph::edgeless(count(sec)?),
        "edgelist" => {
            let file = sec.require_str("file")?;
            let path = config_dir.join(file);
            let text = std::fs::read_to_string(&path).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
            FiniteGraph::parse_edge_list(&text)?
        }
        other => return Err(sec.invalid("graph", format!("unknown graph `{other}`"))),
    };
    Ok(Some(g))
}

fn parse_weights(sec: &Section, g: &FiniteGraph) -> Result<EdgeWeights, RunError> {
    let text = sec.require_str("weights")?;
    let mut out = Vec::new();
    for item in text.split(',') {
        let bad = || sec.invalid("weights", format!("expected `u-v:c`, got `{}`", item.trim()));
        let (edge, c) = item.trim().split_once(':').ok_or_else(bad)?;
        let (u, v) = edge.split_once('-').ok_or_else(bad)?;
        let u: u32 = u.trim().parse().map_err(|_| bad())?;
        let v: u32 = v.trim().parse().map_err(|_| bad())?;
        let c: f64 = c.trim().parse().map_err(|_| bad())?;
        if !g.has_edge(u, v) {
            return Err(sec.invalid("weights", format!("{u}-{v} is not an edge of the graph")));
        }
        out.push((u, v, c));
    }
    Ok(EdgeWeights::new(g.vertex_count(), out, "custom conductances")?)
}

fn lattice<const D: usize>(sec: &Section, kernel: &str, lambda: f64) -> Result<Lattice<D>, RunError> {
    let homogeneous = |k: SharedKernel<Point<D>>| -> Result<Lattice<D>, RunError> {
        Ok(Lattice {
            schedule: Schedule::homogeneous_shared(k.clone(), lambda)?,
            conductances: Some(k),
            lambda,
            frozen: lambda == 0.0,
        })
    };
    match kernel {
        "nearest-neighbor" => homogeneous(Arc::new(OffsetKernel::<D>::nearest_neighbor()?)),
        "long-range" => {
            let alpha = sec.f64("alpha")?.ok_or_else(|| sec.invalid("kernel", "long-range needs `alpha`"))?;
            let r = sec.f64_or("r_trunc", 1e4)?;
            homogeneous(Arc::new(OffsetKernel::<D>::long_range(alpha, r)?))
        }
        "slab" => {
            let width = sec.require_u64("width")?;
            homogeneous(Arc::new(SlabKernel::<D>::new(width)?))
        }
        "cutoff" => Ok(Lattice {
            schedule: build_zd_cutoff::<D>()?.schedule,
            conductances: None,
            lambda: 1.0,
            frozen: false,
        }),
        "edgeless" => Ok(Lattice {
            schedule: Schedule::homogeneous(Edgeless, 1.0)?,
            conductances: None,
            lambda: 0.0,
            frozen: true,
        }),
        other => Err(sec.invalid("kernel", format!("kernel `{other}` is not available on a lattice"))),
    }
}

/// Builds the dynamics of a section. The `cutoff` kernels ignore `lambda`.
pub fn build(sec: &Section, config_dir: &std::path::Path) -> Result<Model, RunError> {
    let kernel = sec.str_or("kernel", "nearest-neighbor").to_string();
    let lambda = sec.f64_or("lambda", 1.0)?;
    if lambda < 0.0 {
        return Err(sec.invalid("lambda", "lambda must be non-negative"));
    }
    match graph(sec, config_dir)? {
        None => {
            let dim = sec.require_u64("dim")?;
            Ok(match dim {
                1 => Model::L1(lattice::<1>(sec, &kernel, lambda)?),
                2 => Model::L2(lattice::<2>(sec, &kernel, lambda)?),
                3 => Model::L3(lattice::<3>(sec, &kernel, lambda)?),
                4 => Model::L4(lattice::<4>(sec, &kernel, lambda)?),
                _ => return Err(sec.invalid("dim", "lattice dimension must be 1, 2, 3 or 4")),
            })
        }
        Some(g) => {
            let schedule = match kernel.as_str() {
                "nearest-neighbor" => Schedule::homogeneous(EdgeWeights::unit(&g), lambda)?,
                "conductances" => Schedule::homogeneous(parse_weights(sec, &g)?, lambda)?,
                "graph-cutoff" => build_graph_cutoff(&g)?.0.schedule,
                "edgeless" => Schedule::homogeneous(Edgeless, 1.0)?,
                other => return Err(sec.invalid("kernel", format!("kernel `{other}` is not available on a finite graph"))),
            };
            Ok(Model::Finite(Finite { graph: g, schedule, lambda }))
        }
    }
}
