//! Counter-based seed derivation.
//!
//! Every random draw in the library is parameterized by a seed derived from a
//! master seed plus a label path (trial index, node id, round, ...), so trials
//! are reproducible and order-independent regardless of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain-separation labels for derived random streams.
pub mod label {
    pub const CHANNEL: u64 = 0x01;
    pub const NOISE: u64 = 0x02;
    pub const GR: u64 = 0x03;
    pub const PHASE: u64 = 0x04;
    pub const INIT: u64 = 0x05;
    pub const ORACLE: u64 = 0x06;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a label path into an independent stream seed.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in path {
        state = splitmix64(state ^ splitmix64(p.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    state
}

/// Seeded RNG for a derived stream.
pub fn rng(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
