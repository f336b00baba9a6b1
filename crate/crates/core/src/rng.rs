//! Seed derivation. Every random decision in the engine draws from a
//! ChaCha stream keyed by `(seed, stream)` so results never depend on
//! evaluation order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type EngineRng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream ^ 0xA076_1D64_78BD_642F))
}

pub fn rng(seed: u64, stream: u64) -> EngineRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Stream tags so unrelated consumers of one seed never collide.
pub mod stream {
    pub const FOLDS: u64 = 1;
    pub const LANDMARK: u64 = 2;
    pub const MODEL_TREE: u64 = 3;
    pub const LEARNER: u64 = 4;
    pub const SEARCH: u64 = 5;
    pub const KB_PIPELINES: u64 = 6;
    pub const META_MODEL: u64 = 7;
    pub const BASELINE: u64 = 8;
    pub const SUBSAMPLE: u64 = 9;
}
