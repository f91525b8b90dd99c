//! Substream derivation for seeded sampling.
//!
//! A substream seed is `seed ^ mix(tag, a, b)`, so each (row, bin) cell gets
//! its own generator and results do not depend on iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_Q: u64 = 0x51;
pub(crate) const TAG_W: u64 = 0x57;
pub(crate) const TAG_SAMPLE: u64 = 0x53;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn substream_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    seed ^ splitmix64(splitmix64(splitmix64(tag) ^ a) ^ b)
}

pub fn substream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, tag, a, b))
}
