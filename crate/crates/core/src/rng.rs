//! Seeded random number generation.
//!
//! Every stochastic routine takes an explicit seed and draws from ChaCha8
//! (`rand_chacha::ChaCha8Rng`), a counter-based stream cipher generator whose
//! output is specified independently of platform and word size. Identical
//! seeds therefore reproduce identical populations, archives, and runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (e.g. per-seed CVT, MC samples).
pub fn derived(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
