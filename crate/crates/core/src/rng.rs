//! Seeded random streams.
//!
//! Every stochastic step (bootstrap, feature subsampling, permutation,
//! SMOTE) draws from its own ChaCha stream keyed by a base seed and a list
//! of stream indices, so results never depend on call order or scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with stream indices into a new 64-bit seed.
pub fn derive_seed(seed: u64, stream: &[u64]) -> u64 {
    stream
        .iter()
        .fold(splitmix64(seed), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub fn stream(seed: u64, stream: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

// Stream tags, one per consumer.
pub(crate) const TAG_SPLIT: u64 = 1;
pub(crate) const TAG_TREE: u64 = 2;
pub(crate) const TAG_PERMUTE: u64 = 3;
pub(crate) const TAG_SMOTE: u64 = 4;
pub(crate) const TAG_RULES: u64 = 5;
