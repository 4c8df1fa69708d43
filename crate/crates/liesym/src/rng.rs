//! Seed management. All randomness in the crate flows from a single 64-bit
//! seed; independent streams are derived with SplitMix64 so that adding a new
//! consumer never perturbs existing draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the crate's internal consumers.
pub mod streams {
    pub const SAMPLING: u64 = 0x01;
    pub const STIFFNESS: u64 = 0x02;
    pub const INITIAL_CONDITIONS: u64 = 0x03;
    pub const EXPERIMENT: u64 = 0x04;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for an independent stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Deterministic generator for `(seed, stream)`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
