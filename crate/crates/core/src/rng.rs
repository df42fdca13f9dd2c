//! Seeded random streams.
//!
//! Every stochastic step in the simulator draws from its own stream, derived
//! from the master seed and a tuple of tags (purpose, client, round, ...).
//! Streams never depend on scheduling, so parallel and serial runs agree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type SimRng = ChaCha8Rng;

/// Purpose tags used when deriving streams.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const SELECT: u64 = 5;
    pub const SHAPLEY: u64 = 6;
    pub const PARTICIPATION: u64 = 7;
    pub const FINETUNE: u64 = 8;
    pub const DATASET: u64 = 9;
    pub const PARTITION: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of tags into a 64-bit seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t))
    })
}

/// A generator seeded directly from `seed`.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// A generator for the stream identified by `(master, tags)`.
pub fn stream(master: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, tags))
}
