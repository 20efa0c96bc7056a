//! Random streams.
//!
//! Every stream is a xoshiro256++ generator seeded through SplitMix64 from a
//! 64-bit base seed. Independent streams are carved out of the same base
//! sequence with the generator's jump functions: `long_jump` separates
//! sample-size levels (2^192 draws apart) and `jump` separates replications
//! inside a level (2^128 draws apart). A stream therefore depends only on
//! `(seed, level, replication)` and never on execution order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

pub fn base_stream(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn derived_stream(seed: u64, level: usize, replication: usize) -> StreamRng {
    let mut rng = base_stream(seed);
    for _ in 0..level {
        rng.long_jump();
    }
    for _ in 0..replication {
        rng.jump();
    }
    rng
}
