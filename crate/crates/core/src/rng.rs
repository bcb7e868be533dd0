//! Seeded random streams.
//!
//! Every stochastic routine takes its generator explicitly. Runs are driven by
//! [`StreamRng`], a portable ChaCha generator, so a seed fixes the output on
//! every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th derived stream of `base`.
///
/// Distinct indices give unrelated seeds, so replicates never share state.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}
