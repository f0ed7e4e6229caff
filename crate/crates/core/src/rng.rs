//! Deterministic random streams.
//!
//! Every randomized routine draws from ChaCha8, a counter-based generator
//! whose output for a given `(seed, stream)` pair is fixed across platforms.
//! Independent work items (replications, resamples, field draws) each get
//! their own stream, so results do not depend on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// The generator for work item `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, used when a randomized routine runs inside another one.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed ^ 0x9e37_79b9_7f4a_7c15, index).next_u64()
}
