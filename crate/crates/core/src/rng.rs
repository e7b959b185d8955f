//! Counter-based randomness.
//!
//! Every random quantity in the crate is a pure function of a 64-bit key. Keys
//! are derived by hashing `(seed, domain, index...)` through the SplitMix64
//! finalizer, and a stream is the SplitMix64 sequence evaluated at a counter.
//! Nothing depends on the order in which values are requested, which is what
//! makes lazily revealed ring times and parallel sample blocks reproducible.

use rand::rngs::SmallRng;
use rand::SeedableRng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes an ordered pair of words into a fresh key.
#[inline]
pub fn combine(a: u64, b: u64) -> u64 {
    mix64(a.wrapping_add(GOLDEN) ^ mix64(b.wrapping_add(GOLDEN.rotate_left(17))))
}

/// Seed for the `index`-th independent sample of a run.
#[inline]
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    combine(combine(seed, 0x5a4d_504c_455f_5345), index)
}

/// Derives a sub-seed for a named purpose (e.g. the reservoir shuffles of a sample).
#[inline]
pub fn derive(seed: u64, domain: u64) -> u64 {
    combine(seed, domain)
}

/// The `counter`-th word of the stream keyed by `key`.
#[inline]
pub fn word(key: u64, counter: u64) -> u64 {
    mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform in `(0, 1]`, safe to pass to `ln`.
#[inline]
pub fn open_unit(w: u64) -> f64 {
    ((w >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `[0, 1)`.
#[inline]
pub fn unit(w: u64) -> f64 {
    (w >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Arrival times in `[0, duration)` of a rate-`rate` Poisson process read
/// from the stream `key`, increasing. `empty` must be `e^{-rate * duration}`:
/// a first uniform at or below it means no arrival, which spares a logarithm
/// in the common empty case.
#[inline]
pub fn poisson_arrivals(key: u64, rate: f64, duration: f64, empty: f64, mut push: impl FnMut(f64)) {
    if rate <= 0.0 {
        return;
    }
    let first = open_unit(word(key, 0));
    if first <= empty {
        return;
    }
    let mut t = -first.ln() / rate;
    let mut i = 1;
    while t < duration {
        push(t);
        t += -open_unit(word(key, i)).ln() / rate;
        i += 1;
    }
}

/// Sequential generator for walk simulation, seeded from a derived key.
pub fn stream(seed: u64) -> SmallRng {
    SmallRng::seed_from_u64(seed)
}
