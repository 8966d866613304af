//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a seed derived from a base seed plus a path of stream tags, so
//! outputs depend only on (inputs, seed) and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `base` with each tag in `path`, in order.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

pub fn rng_from(base: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

/// Stream tags. Distinct constants keep unrelated streams independent.
pub mod stream {
    pub const JITTER: u64 = 0x6a69_7474;
    pub const NOISE: u64 = 0x6e6f_6973;
    pub const SPLIT: u64 = 0x7370_6c74;
    pub const INIT: u64 = 0x696e_6974;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const EPSILON: u64 = 0x6570_7369;
    pub const PROBE: u64 = 0x7072_6f62;
    pub const TEST_POOL: u64 = 0x7465_7374;
    pub const MODEL_A: u64 = 0x6d6f_6441;
    pub const MODEL_B: u64 = 0x6d6f_6442;
}
