//! Seeded problems shared by the benchmarks.

use kpair_core::generate::{grid_pencil, random_dense_pencil};
use kpair_core::Pencil;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sparse 2-D grid pencil of dimension `side²`.
pub fn grid(side: usize, seed: u64) -> Pencil {
    grid_pencil(side, side, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Dense random pencil of dimension `n`.
pub fn dense(n: usize, seed: u64) -> Pencil {
    random_dense_pencil(n, &mut ChaCha8Rng::seed_from_u64(seed))
}
