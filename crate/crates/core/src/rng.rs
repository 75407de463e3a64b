//! Seeded, splittable random streams.
//!
//! Every consumer derives its generator from `(seed, stream)`; ChaCha's 64-bit
//! stream selector gives independent sequences for the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ChainRng = ChaCha8Rng;

/// Stream reserved for dataset generation and train/test splits.
pub const DATA_STREAM: u64 = 0;

/// Stream for chain `chain_id`. Variants that share a `chain_id` see the same
/// noise, which makes cross-variant comparisons paired.
pub fn chain_stream(chain_id: u64) -> u64 {
    1 + chain_id
}

pub fn stream_rng(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
