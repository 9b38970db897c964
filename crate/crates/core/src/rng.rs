//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`Xoshiro256PlusPlus`] generator.
//! Independent child streams are derived from a parent seed and a `(tag, index)`
//! pair by SplitMix64 mixing, so batch `q` of a dataset always sees the same
//! numbers no matter how many other batches were drawn before it or on which
//! thread.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SeededRng = Xoshiro256PlusPlus;

/// Stream tags. Each kind of draw gets its own family of child streams.
pub mod stream {
    pub const GRAPH: u64 = 0x01;
    pub const SOURCES: u64 = 0x02;
    pub const FILTER: u64 = 0x03;
    pub const NOISE: u64 = 0x04;
    pub const INIT_PARAMS: u64 = 0x05;
    pub const INIT_STATES: u64 = 0x06;
    pub const SHUFFLE: u64 = 0x07;
    pub const VALIDATION: u64 = 0x08;
    pub const TEST: u64 = 0x09;
    pub const TRIAL: u64 = 0x0a;
    pub const FILTER_ASSIGN: u64 = 0x0b;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the seed of child stream `(tag, index)` of `parent`.
pub fn child_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(parent) ^ tag.rotate_left(32)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

pub fn child_rng(parent: u64, tag: u64, index: u64) -> SeededRng {
    rng_from_seed(child_seed(parent, tag, index))
}
