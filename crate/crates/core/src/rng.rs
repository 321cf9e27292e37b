//! Seed derivation for reproducible, worker-count-independent random streams.

use rand::rngs::SmallRng;
use rand::SeedableRng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of child stream `index` of `seed`.
#[inline]
pub fn derive(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// A fast generator for stream `index` of `seed`.
#[inline]
pub fn stream(seed: u64, index: u64) -> SmallRng {
    SmallRng::seed_from_u64(derive(seed, index))
}

/// Converts a probability to a threshold on uniform `u64` draws.
///
/// A draw `x` is a success iff `x < threshold`; `p >= 1` maps to `u64::MAX`
/// and is special-cased by [`bernoulli`].
#[inline]
pub fn threshold(p: f64) -> u64 {
    if p >= 1.0 {
        u64::MAX
    } else if p <= 0.0 {
        0
    } else {
        (p * 18_446_744_073_709_551_616.0) as u64
    }
}

/// Bernoulli trial on a uniform draw against a precomputed threshold.
#[inline]
pub fn bernoulli(draw: u64, threshold: u64) -> bool {
    threshold == u64::MAX || draw < threshold
}

// Stream labels for the sub-streams of a single process replicate.
pub(crate) const EDGE_STREAM: u64 = 0xED6E;
pub(crate) const POLICY_STREAM: u64 = 0x9011C7;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derive_is_deterministic_and_spreads() {
        assert_eq!(derive(1, 2), derive(1, 2));
        assert_ne!(derive(1, 2), derive(1, 3));
        assert_ne!(derive(1, 2), derive(2, 2));
        let mut a = stream(5, 0);
        let mut b = stream(5, 0);
        assert_eq!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn threshold_frequencies() {
        let t = threshold(0.3);
        let mut hits = 0u32;
        for i in 0..200_000u64 {
            if bernoulli(mix64(i), t) {
                hits += 1;
            }
        }
        let f = f64::from(hits) / 200_000.0;
        assert!((f - 0.3).abs() < 0.005, "{f}");
        assert!(bernoulli(u64::MAX, threshold(1.0)));
        assert!(!bernoulli(0, threshold(0.0)));
    }
}
