//! Seed derivation for independent deterministic streams.
//!
//! Every stochastic stage (dataset generation, Lloyd initialization, walk
//! starts, insertion order) draws from its own stream derived from the master
//! seed, so changing one stage never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Splitmix64 finalizer, used to mix seed material.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and a stream label.
pub fn derive(seed: u64, label: u64) -> u64 {
    mix(mix(seed) ^ label.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Derives a child seed from `seed` and two labels (e.g. depth and index).
pub fn derive2(seed: u64, a: u64, b: u64) -> u64 {
    derive(derive(seed, a), b)
}

/// A seeded PRNG for the given stream.
pub fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, label))
}

/// Stream labels for the pipeline stages.
pub mod labels {
    pub const DATASET: u64 = 1;
    pub const QUERIES: u64 = 2;
    pub const LLOYD: u64 = 3;
    pub const INSERTION_ORDER: u64 = 4;
    pub const WALK: u64 = 5;
    pub const JITTER: u64 = 6;
}
