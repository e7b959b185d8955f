//! Unit-periodic, piecewise-constant rate schedules.
//!
//! Time is cut into windows, one per segment per period. Window `w` belongs to
//! period `w / S` and segment `w % S`, where `S` is the number of segments.
//! Event times are stored as `(window, offset)` pairs so segment boundaries
//! are exact.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::graph::Site;
use crate::kernel::{Kernel, SharedKernel};

#[derive(Clone)]
pub struct Segment<S: Site> {
    pub kernel: SharedKernel<S>,
    /// Rate multiplier: the edge `{x, y}` rings at rate `rate * w(x, y)`.
    pub rate: f64,
    pub duration: Ratio<u32>,
}

impl<S: Site> fmt::Debug for Segment<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Segment({}, rate={}, duration={})", self.kernel.describe(), self.rate, self.duration)
    }
}

impl<S: Site> Segment<S> {
    pub fn new(kernel: impl Kernel<S> + 'static, rate: f64, duration: Ratio<u32>) -> Self {
        Segment {
            kernel: Arc::new(kernel),
            rate,
            duration,
        }
    }
}

/// A point in time as `(window, offset into the window)`.
#[derive(Clone, Copy, Debug)]
pub struct Instant {
    pub window: u64,
    pub offset: f64,
}

impl PartialEq for Instant {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Instant {}

impl PartialOrd for Instant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Instant {
    fn cmp(&self, other: &Self) -> Ordering {
        self.window
            .cmp(&other.window)
            .then(self.offset.total_cmp(&other.offset))
    }
}

#[derive(Clone, Debug)]
pub struct Schedule<S: Site> {
    segments: Vec<Segment<S>>,
    starts: Vec<f64>,
    durations: Vec<f64>,
}

impl<S: Site> Schedule<S> {
    pub fn new(segments: Vec<Segment<S>>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::invalid("schedule", "needs at least one segment"));
        }
        let mut total = Ratio::from_integer(0u32);
        let mut starts = Vec::with_capacity(segments.len());
        for s in &segments {
            if !(s.rate >= 0.0) || !s.rate.is_finite() {
                return Err(Error::invalid("rate", format!("{} is not a finite non-negative rate", s.rate)));
            }
            if s.duration <= Ratio::from_integer(0) {
                return Err(Error::invalid("duration", "segment durations must be positive"));
            }
            starts.push(ratio_f64(total));
            total += s.duration;
        }
        if total != Ratio::from_integer(1) {
            return Err(Error::invalid("schedule", format!("durations sum to {total}, not 1")));
        }
        let durations = segments.iter().map(|s| ratio_f64(s.duration)).collect();
        Ok(Schedule {
            segments,
            starts,
            durations,
        })
    }

    /// One segment of unit length.
    pub fn homogeneous(kernel: impl Kernel<S> + 'static, rate: f64) -> Result<Self> {
        Self::new(vec![Segment::new(kernel, rate, Ratio::from_integer(1))])
    }

    pub fn homogeneous_shared(kernel: SharedKernel<S>, rate: f64) -> Result<Self> {
        Self::new(vec![Segment {
            kernel,
            rate,
            duration: Ratio::from_integer(1),
        }])
    }

    pub fn segments(&self) -> &[Segment<S>] {
        &self.segments
    }

    /// Windows per unit period.
    pub fn period_len(&self) -> u64 {
        self.segments.len() as u64
    }

    #[inline]
    pub fn segment_index(&self, window: u64) -> usize {
        (window % self.period_len()) as usize
    }

    #[inline]
    pub fn segment_for_window(&self, window: u64) -> &Segment<S> {
        &self.segments[self.segment_index(window)]
    }

    #[inline]
    pub fn window_duration(&self, window: u64) -> f64 {
        self.durations[self.segment_index(window)]
    }

    pub fn window_start(&self, window: u64) -> f64 {
        (window / self.period_len()) as f64 + self.starts[self.segment_index(window)]
    }

    /// First window of period `n`, i.e. the window that starts at integer time `n`.
    #[inline]
    pub fn integer_window(&self, n: u64) -> u64 {
        n * self.period_len()
    }

    /// The instant for real time `t >= 0`.
    pub fn locate(&self, t: f64) -> Instant {
        assert!(t >= 0.0 && t.is_finite(), "time must be finite and non-negative");
        let period = t.floor();
        let frac = t - period;
        let mut seg = self.segments.len() - 1;
        for (i, &s) in self.starts.iter().enumerate().skip(1) {
            if frac < s {
                seg = i - 1;
                break;
            }
        }
        let window = period as u64 * self.period_len() + seg as u64;
        Instant {
            window,
            offset: (frac - self.starts[seg]).max(0.0),
        }
    }

    pub fn to_time(&self, at: Instant) -> f64 {
        self.window_start(at.window) + at.offset
    }

    /// Largest single-jump radius over all segment kernels.
    pub fn support_radius(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| s.kernel.support_radius())
            .fold(0.0, f64::max)
    }

    /// True when the segment sequence reads the same forwards and backwards.
    pub fn is_palindromic(&self) -> bool {
        let k = self.segments.len();
        (0..k / 2).all(|i| {
            let (a, b) = (&self.segments[i], &self.segments[k - 1 - i]);
            Arc::ptr_eq(&a.kernel, &b.kernel) && a.rate == b.rate && a.duration == b.duration
        })
    }
}

pub(crate) fn ratio_f64(r: Ratio<u32>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::FiniteGraph;
    use crate::kernel::EdgeWeights;

    fn thirds() -> Schedule<u32> {
        let g = FiniteGraph::path(3);
        let k: SharedKernel<u32> = Arc::new(EdgeWeights::unit(&g));
        let third = Ratio::new(1, 3);
        Schedule::new(vec![
            Segment { kernel: k.clone(), rate: 1.0, duration: third },
            Segment { kernel: k.clone(), rate: 2.0, duration: third },
            Segment { kernel: k, rate: 1.0, duration: third },
        ])
        .unwrap()
    }

    #[test]
    fn durations_must_sum_to_one() {
        let g = FiniteGraph::path(2);
        let seg = Segment::new(EdgeWeights::unit(&g), 1.0, Ratio::new(1, 2));
        assert!(Schedule::new(vec![seg.clone()]).is_err());
        assert!(Schedule::new(vec![seg.clone(), seg]).is_ok());
        assert!(Schedule::<u32>::new(vec![]).is_err());
    }

    #[test]
    fn locate_round_trips() {
        let s = thirds();
        assert_eq!(s.locate(0.0), Instant { window: 0, offset: 0.0 });
        let at = s.locate(2.5);
        assert_eq!(at.window, 7);
        assert!((s.to_time(at) - 2.5).abs() < 1e-12);
        assert_eq!(s.integer_window(4), 12);
        assert_eq!(s.locate(4.0).window, 12);
        assert!(s.is_palindromic());
    }

    #[test]
    fn instants_order_by_window_first() {
        let a = Instant { window: 1, offset: 0.9 };
        let b = Instant { window: 2, offset: 0.0 };
        assert!(a < b);
    }
}
