//! Seeded randomness.
//!
//! Every stochastic step in the crate draws from ChaCha8, seeded with a
//! 64-bit value, so folds, splits and simulated data are reproducible
//! bit-for-bit across platforms. Independent streams are derived with
//! [`mix_seed`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. A bijection on `u64`.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of stream `index` from `base`.
///
/// `index -> base + index * 0x9e3779b97f4a7c15` is a bijection modulo 2^64
/// (odd multiplier) and the finalizer is a bijection, so for a fixed base
/// distinct indices always give distinct seeds.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(base.wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// A uniformly random permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeded(seed));
    idx
}
