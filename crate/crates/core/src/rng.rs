//! Per-path random streams.
//!
//! Path `i` of a batch seeded with `seed` draws from a ChaCha8 stream keyed by
//! [`path_seed`]`(seed, i)`. The `k`-th uniform of a path is word `2k` of its
//! stream, so any `(path, step)` is reachable in O(1) and paths never share
//! state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of path `index` within a batch seeded by `seed`.
pub fn path_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform stream for a single path.
#[derive(Clone, Debug)]
pub struct PathStream(ChaCha8Rng);

impl PathStream {
    pub fn new(path_seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(path_seed))
    }

    /// Stream positioned just before the uniform for 1-based `step`.
    pub fn at_step(path_seed: u64, step: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(path_seed);
        rng.set_word_pos(2 * (step as u128 - 1));
        Self(rng)
    }

    /// Next uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}
