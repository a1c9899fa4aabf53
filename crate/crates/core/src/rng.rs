//! Seed derivation so every random stream is a pure function of its
//! coordinates (run seed, iteration, prompt, rollout index, ...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags keep streams for different purposes disjoint.
pub mod tag {
    pub const PRETRAIN: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRACKER_INIT: u64 = 3;
    pub const PROMPT_SELECT: u64 = 4;
    pub const ROLLOUT: u64 = 5;
    pub const EVAL: u64 = 6;
    pub const ORACLE: u64 = 7;
    pub const PERMUTATION: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(base: u64, parts: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}
