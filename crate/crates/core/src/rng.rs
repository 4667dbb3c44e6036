//! Seeding: ChaCha8 generators with one stream per purpose, and the stable
//! row-seed hash `hash64(baseSeed, nIndex, repIndex)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers; the same seed on different streams gives independent sequences.
pub mod stream {
    pub const DATA: u64 = 1;
    pub const CHAIN: u64 = 2;
    pub const HOLDOUT: u64 = 3;
    pub const DIVERGENCE: u64 = 4;
    pub const DIAGNOSTIC: u64 = 5;
}

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Row seed for grid point `n_index`, replication `rep_index`.
pub fn hash64(base_seed: u64, n_index: u64, rep_index: u64) -> u64 {
    let h = splitmix64(base_seed);
    let h = splitmix64(h ^ n_index);
    splitmix64(h ^ rep_index.rotate_left(32))
}
