//! Seed derivation and the generator used for all synthesis.
//!
//! Every stream is a ChaCha20 keystream (`rand_chacha::ChaCha20Rng`, stream 0)
//! keyed by four consecutive SplitMix64 outputs of a 64-bit seed, little endian.
//! Child seeds come from [`derive_seed`], which folds a path of integers into
//! the parent seed with the SplitMix64 finalizer. Streams are therefore
//! addressable by `(root seed, path)` and independent of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identity string recorded in dataset manifests.
pub const GENERATOR_ID: &str = "chacha20-splitmix64-v1";

pub type SynthRng = ChaCha20Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `path` under `parent`.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(parent), |acc, &p| {
        mix64(
            acc.wrapping_add(GOLDEN_GAMMA)
                .wrapping_add(mix64(p.wrapping_add(GOLDEN_GAMMA))),
        )
    })
}

pub fn rng_from_seed(seed: u64) -> SynthRng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha20Rng::from_seed(key)
}

/// Stream tags used with [`derive_seed`].
pub mod tags {
    pub const SCENE: u64 = 1;
    pub const FRAME: u64 = 2;
    pub const SPLIT: u64 = 3;
    pub const ENVIRONMENT: u64 = 4;
    pub const PLACEMENT: u64 = 5;
    pub const COUNT: u64 = 6;
}
