//! Seed derivation for reproducible parallel streams.
//!
//! Path `i` of an ensemble seeded with `base` draws from
//! `ChaCha8Rng::seed_from_u64(split(base, i))`. `split` is one SplitMix64
//! step over `base + (i + 1) * 0x9E37_79B9_7F4A_7C15`, so streams depend only
//! on `(base, i)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn split(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
