//! Counter-based keyed randomness.
//!
//! Every stochastic component derives a fresh ChaCha stream from a
//! `(seed, tag, major, minor)` key. Draws are therefore reproducible
//! regardless of iteration strategy: regenerating edge 17 of a graph, or
//! the noise of step 4012, never requires replaying the draws before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the key spaces of unrelated components disjoint.
pub mod stream {
    pub const GRAPH_EDGE: u64 = 0x01;
    pub const DATA_TRUTH: u64 = 0x02;
    pub const DATA_FEATURE: u64 = 0x03;
    pub const DATA_LABEL: u64 = 0x04;
    pub const DATA_SPLIT: u64 = 0x05;
    pub const TRAIN_BATCH: u64 = 0x06;
    pub const TRAIN_NOISE: u64 = 0x07;
    pub const BOUND_SHUFFLE: u64 = 0x08;
    pub const BOUND_BASELINE: u64 = 0x09;
}

/// Derives an independent generator for the `(tag, major, minor)` substream
/// of `seed`.
pub fn keyed_rng(seed: u64, tag: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&major.to_le_bytes());
    key[24..32].copy_from_slice(&minor.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
