//! Deterministic child-seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream index (class index, repeat index, ...).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Stage tags, so stages sharing a master seed draw independent streams.
pub mod stream {
    pub const AUGMENT: u64 = 0xA0;
    pub const PARTITION: u64 = 0xB0;
    pub const GCN: u64 = 0xC0;
    pub const SPLIT: u64 = 0xD0;
    pub const SBM_GRAPH: u64 = 0xE0;
    pub const SBM_FEATURES: u64 = 0xE1;
    pub const THEORY: u64 = 0xF0;
}

pub fn rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, stream))
}
