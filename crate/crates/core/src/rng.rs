//! Seeded random streams.
//!
//! Every stochastic stage draws from a ChaCha8 stream derived from the master
//! seed plus a stage tag and an item index, so an item's output does not depend
//! on how work is split across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags mixed into derived seeds.
pub mod stage {
    pub const DISPLAY: u64 = 0x6469_7370;
    pub const RENDER: u64 = 0x7265_6e64;
    pub const COMPOSE: u64 = 0x636f_6d70;
    pub const LABEL: u64 = 0x6c61_6265;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` to produce an independent seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream(master: u64, parts: &[u64]) -> Rng {
    seeded(derive_seed(master, parts))
}
