//! Seeded random streams.
//!
//! Every random quantity is drawn from its own ChaCha stream derived from one master
//! seed, so adding nodes or links never shifts the draws of unrelated quantities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream identifiers for topology sampling.
pub mod streams {
    pub const LT_PROCESS: u64 = 1;
    pub const LJ_PROCESS: u64 = 2;
    pub const LR_OFFSETS: u64 = 3;
    pub const ER_OFFSETS: u64 = 4;
    pub const TRANSCEIVER_INIT: u64 = 5;
    pub const BASELINE: u64 = 6;
    pub const CASE_STUDY: u64 = 7;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of words into one 64-bit key.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(seed), |acc, &p| mix64(acc ^ mix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent stream keyed by an arbitrary tuple (used per channel link).
pub fn keyed(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, 1).gen();
        let b: u64 = substream(7, 1).gen();
        let c: u64 = substream(7, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive(1, &[2, 3]), derive(1, &[3, 2]));
    }
}
