//! Bounded-range cutoff schedules and the coupled reservoir process.

pub mod cutoff;
pub mod reservoir;

pub use cutoff::{
    build_graph_cutoff, build_zd_cutoff, verify_graph_cutoff, verify_zd_cutoff, CutoffReport, CutoffSchedule, CutoffSource,
    RangeMetric,
};
pub use reservoir::{sample_reservoir, verify_sandwich, ReservoirConfig, ReservoirSample, SandwichReport};
