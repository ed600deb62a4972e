//! Deterministic seed derivation.
//!
//! Independent random streams (per query, per epoch, per experiment cell) are
//! derived from a master seed by folding a list of tags through the SplitMix64
//! finalizer:
//!
//! ```text
//! h = mix(master)
//! for tag in tags: h = mix(h ^ mix(tag + 0x9E3779B97F4A7C15))
//! ```
//!
//! Streams keyed by different tags never share state, so adding a new consumer
//! (an extra arm, an extra profile) does not perturb existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used across the crate. Values are part of the reproducibility
/// contract; do not renumber.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const SHUFFLE: u64 = 3;
    pub const EPISODE: u64 = 4;
    pub const VALIDATION: u64 = 5;
    pub const FINETUNE: u64 = 6;
    pub const SMOTE: u64 = 7;
    pub const ARM: u64 = 8;
    pub const TRAIN: u64 = 9;
}

pub type Rng = ChaCha8Rng;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |h, &t| {
        splitmix64(h ^ splitmix64(t.wrapping_add(0x9E37_79B9_7F4A_7C15)))
    })
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, tags: &[u64]) -> Rng {
    rng_from_seed(derive_seed(master, tags))
}
