//! Random stirring processes, inverted orbits and conductance random walks.

pub mod constructions;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod kernel;
pub mod matching;
pub mod oracle;
pub mod rng;
pub mod schedule;
pub mod stats;
pub mod stirring;
pub mod walks;

pub use error::{Error, Result};
pub use graph::{FiniteGraph, Point, Site};
pub use kernel::{cube_class, cube_edge_partition, CubeClass, CubeKernel, EdgeWeights, Edgeless, Kernel, KernelKind, OffsetKernel, SharedKernel, SlabKernel};
pub use matching::{greedy_matching_decomposition, greedy_matching_decomposition_with_order, MatchingDecomposition};
pub use num_rational::Ratio;
pub use schedule::{Instant, Schedule, Segment};
pub use stirring::{forward_stirring, sample_forward_orbit, sample_inverted_orbit_continuous, sample_inverted_orbit_discrete, OrbitSample, RingStore};
pub use stats::{Estimate, RunningStats};
pub use walks::{classify_lattice, classify_recurrence, effective_resistance, escape_lower_bound, estimate_escape, graph_resistance, lattice_resistance, Classification, ClassifierThresholds, EscapeEstimate, Recurrence, TraceWalk, WalkMode};
pub use estimators::{BoundReport, Direction, EscapeBracket, OrbitStats, TailRegime, Verdict};
pub use oracle::{exact_distribution, exact_orbit_pgf, exact_orbit_size_distribution, exact_particle_kernel, exact_unit_distribution, liggett_sides, verify_liggett, PermutationDistribution};
pub use constructions::{build_graph_cutoff, build_zd_cutoff, verify_graph_cutoff, verify_zd_cutoff, CutoffReport, CutoffSchedule, ReservoirConfig, SandwichReport};
