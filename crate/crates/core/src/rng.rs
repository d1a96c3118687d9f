//! Seed derivation. Every random stream is a pure function of the master seed
//! and a path of indices, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream labels split from a scene seed.
pub mod stream {
    pub const TERRAIN: u64 = 1;
    pub const PLACEMENT: u64 = 2;
    pub const SCAN: u64 = 3;
    pub const DIRECTION: u64 = 4;
    pub const CLASS_MIX: u64 = 5;
    pub const DETECT: u64 = 6;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an index.
#[inline]
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |s, &i| derive(s, i))
}

pub fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_path(seed, path))
}
