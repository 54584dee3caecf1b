//! Counter-based sampling.
//!
//! Every draw is a pure function of a key tuple, so values can be replayed
//! in any order (parallel trials, out-of-order queries) without storing a
//! stream position.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes an ordered tuple of words into one 64-bit value.
#[inline]
pub fn hash_words(words: &[u64]) -> u64 {
    words.iter().fold(0x243f_6a88_85a3_08d3, |acc, &w| mix64(acc ^ w))
}

/// Maps a 64-bit value to a double in `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[lo, hi)` keyed by `words`.
#[inline]
pub fn uniform(words: &[u64], lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(hash_words(words))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_range() {
        for i in 0..10_000u64 {
            let u = unit_f64(hash_words(&[7, i]));
            assert!((0.0..1.0).contains(&u));
        }
        assert_eq!(unit_f64(0), 0.0);
        assert!(unit_f64(u64::MAX) < 1.0);
    }

    #[test]
    fn order_of_words_matters() {
        assert_ne!(hash_words(&[1, 2]), hash_words(&[2, 1]));
        assert_eq!(hash_words(&[1, 2, 3]), hash_words(&[1, 2, 3]));
    }
}
