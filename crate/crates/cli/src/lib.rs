//! Experiment runner behind the `stir-orbits` binary.

pub mod config;
pub mod experiments;
pub mod model;
pub mod output;
pub mod selftest;

use std::path::Path;

use stir_core::rng;

pub use config::Config;
pub use output::Row;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error(transparent)]
    Core(#[from] stir_core::Error),
    #[error("{0}")]
    Io(String),
}

impl RunError {
    /// 3 for resource limits, 2 for everything wrong with the input.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Core(stir_core::Error::SizeLimit { .. }) => 3,
            _ => 2,
        }
    }
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_SIGMA: f64 = 3.0;

/// Everything a run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub digest: String,
    pub seed: u64,
    pub rows: Vec<Row>,
    pub csv: String,
    pub summary: String,
}

impl Outcome {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated()).count()
    }

    pub fn exit_code(&self) -> i32 {
        if self.violations() == 0 {
            0
        } else {
            1
        }
    }
}

/// Runs every experiment of `config` in file order.
pub fn run(config: &Config) -> Result<Outcome, RunError> {
    let g = &config.global;
    let seed = g.u64_or("seed", DEFAULT_SEED)?;
    let sigma = g.f64_or("sigma", DEFAULT_SIGMA)?;
    if sigma <= 0.0 {
        return Err(g.invalid("sigma", "sigma must be positive"));
    }
    g.finish()?;
    let digest = config.digest();
    let mut rows = Vec::new();
    let mut summary = format!("config {digest}  seed {seed}  sigma {sigma}\n");
    for (i, sec) in config.experiments.iter().enumerate() {
        let ctx = experiments::Ctx {
            sigma,
            seed: rng::derive(seed, i as u64),
            base_dir: &config.base_dir,
        };
        let (r, extra) = experiments::run(sec, &ctx)?;
        summary.push_str(&format!("[{}] line {}\n", sec.kind, sec.line));
        for l in &extra.lines {
            summary.push_str(&format!("  {l}\n"));
        }
        for row in &r {
            summary.push_str(&row.summary());
            summary.push('\n');
        }
        rows.extend(r);
    }
    let bad = rows.iter().filter(|r| r.violated()).count();
    summary.push_str(&format!("{} rows, {} violated\n", rows.len(), bad));
    Ok(Outcome {
        csv: output::csv(&rows, &digest),
        digest,
        seed,
        rows,
        summary,
    })
}

/// [`run`] on a dedicated pool of `workers` threads.
pub fn run_with_workers(config: &Config, workers: usize) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Io(e.to_string()))?;
    pool.install(|| run(config))
}

pub fn load_and_run(path: &Path, seed: Option<u64>) -> Result<Outcome, RunError> {
    let mut config = Config::load(path)?;
    if let Some(s) = seed {
        config.override_seed(s);
    }
    run(&config)
}

/// CSV listing of a greedy matching decomposition: `class,u,v` per edge.
pub fn decompose_csv(edge_list: &str) -> Result<(String, Vec<String>), RunError> {
    let g = stir_core::FiniteGraph::parse_edge_list(edge_list)?;
    let (lines, dec) = experiments::decomposition_lines(&g);
    let mut csv = String::from("class,u,v\n");
    for (k, class) in dec.classes.iter().enumerate() {
        for (u, v) in class {
            csv.push_str(&format!("{},{u},{v}\n", k + 1));
        }
    }
    Ok((csv, lines))
}
