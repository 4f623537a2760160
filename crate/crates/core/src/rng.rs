//! Seeded, splittable random number generation.
//!
//! Every random stream is a ChaCha8 generator keyed by a 64-bit master seed
//! and selected by a 64-bit stream id, so independent workers (grid cells,
//! folds, sampler blocks) draw from disjoint streams that depend only on
//! `(seed, stream)` and never on scheduling order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

/// Generator for stream `stream` under master seed `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed from a parent seed and an index (SplitMix64 mixing).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
