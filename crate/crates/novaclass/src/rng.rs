//! Seeded random number generation.
//!
//! Every stochastic step in the crate draws from a [`ChaCha8Rng`] seeded by
//! the caller, so identical seeds reproduce identical results bit-for-bit
//! within a build.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The deterministic generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Creates a generator from a 64-bit seed.
pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child generator by drawing a fresh seed.
///
/// Drawing child seeds up front keeps sub-tasks (restarts, folds, windows)
/// reproducible no matter how the caller later orders their execution.
pub fn child(rng: &mut SeededRng) -> SeededRng {
    ChaCha8Rng::seed_from_u64(rng.random())
}
