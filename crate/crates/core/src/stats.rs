//! Mergeable summary statistics and deterministic sample blocks.

use std::ops::Range;

use rayon::prelude::*;

/// Samples per block. Blocks are the unit of parallel work; results are
/// always combined in block order, so the worker count never changes output.
pub const BLOCK: u64 = 2048;

/// Runs `f` on consecutive index ranges covering `0..samples` and returns the
/// results in range order.
pub fn run_blocks<T, F>(samples: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let blocks = samples.div_ceil(BLOCK);
    (0..blocks)
        .into_par_iter()
        .map(|b| f(b * BLOCK..((b + 1) * BLOCK).min(samples)))
        .collect()
}

/// Streaming mean and variance (Welford), mergeable (Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = n;
    }

    /// `count` copies of `value`.
    pub fn from_constant(value: f64, count: u64) -> Self {
        RunningStats {
            count,
            mean: if count > 0 { value } else { 0.0 },
            m2: 0.0,
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr(),
            count: self.count,
            seed,
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Merges per-block statistics in order.
pub fn merge_all<'a>(parts: impl IntoIterator<Item = &'a RunningStats>) -> RunningStats {
    let mut total = RunningStats::new();
    for p in parts {
        total.merge(p);
    }
    total
}

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
    pub seed: u64,
}

impl Estimate {
    /// A known value, carrying no sampling error.
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            count: 0,
            seed: 0,
        }
    }
}
