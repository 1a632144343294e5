//! Deterministic random streams.
//!
//! Every consumer of randomness derives its own ChaCha substream from a
//! master seed plus a small tuple of integers (cycle, particle index, ...).
//! Results therefore do not depend on evaluation order or thread partitioning.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a list of stream coordinates into a new seed.
pub fn derive_seed(seed: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(seed), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn stream(seed: u64, coords: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, coords))
}

/// Stream labels so that different subsystems never collide.
pub mod label {
    pub const INIT: u64 = 1;
    pub const MOTION: u64 = 2;
    pub const RESAMPLE: u64 = 3;
    pub const GLOBAL: u64 = 4;
    pub const WORLD: u64 = 5;
    pub const SCAN: u64 = 6;
    pub const TRAIN: u64 = 7;
    pub const INJECT: u64 = 8;
    pub const SCENE: u64 = 9;
}
