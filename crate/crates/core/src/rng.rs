//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha20 stream selected by
//! `(seed, stream id)`, so replicate `r` sees the same numbers whether the
//! replicates run sequentially or on a thread pool.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type FridgeRng = ChaCha20Rng;

/// Stream families; combined with an index by [`stream_id`].
pub mod purpose {
    pub const DATA: u64 = 1;
    pub const FOLDS: u64 = 2;
    pub const SPLITS: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const REPLICATE: u64 = 5;
}

pub fn stream_id(purpose: u64, index: u64) -> u64 {
    (purpose << 48) | (index & ((1 << 48) - 1))
}

pub fn seeded(seed: u64) -> FridgeRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn substream(seed: u64, stream: u64) -> FridgeRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, for handing a seed to a nested procedure.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    use rand::RngCore;
    substream(seed, stream).next_u64()
}

pub fn permutation(n: usize, rng: &mut FridgeRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}
