//! Seeding plumbing. Every source of randomness in the suite is a ChaCha8
//! stream derived from the run seed and a fixed stream tag, so runs are
//! reproducible byte-for-byte and components cannot perturb each other by
//! consuming draws out of order.

use rand::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

/// Stream tags for the independent RNG streams a run uses.
pub mod stream {
    pub const ENV: u64 = 1;
    pub const POLICY_INIT: u64 = 2;
    pub const POLICY_SAMPLE: u64 = 3;
    pub const PROVIDER: u64 = 4;
    pub const EVAL: u64 = 5;
    pub const EXPERT: u64 = 6;
}

/// splitmix64 finalizer; decorrelates (seed, tag) pairs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG for a named stream of a run.
pub fn stream_rng(seed: u64, tag: u64) -> Rng {
    Rng::seed_from_u64(mix(seed ^ mix(tag)))
}

/// Plain seeded RNG for callers that manage their own streams.
pub fn seed_rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
