//! Deterministic seed derivation.
//!
//! Every source of randomness in a run (weight init, batch order, noise
//! draws, mask updates, ablation cells, repeats) gets its own stream derived
//! from the run seed, so adding a consumer never shifts another stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; decorrelates nearby (seed, tag) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a base seed and a stream tag.
pub fn child_seed(base: u64, tag: u64) -> u64 {
    mix(base ^ mix(tag))
}

/// RNG for a named stream of a run.
pub fn stream_rng(base: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(base, tag))
}

/// Stream tags used by the training loop and harnesses.
pub mod tags {
    pub const WEIGHT_INIT: u64 = 1;
    pub const MASK_INIT: u64 = 2;
    pub const BATCH_ORDER: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const MASK_UPDATE: u64 = 5;
    pub const DIAGNOSTICS: u64 = 6;
}
