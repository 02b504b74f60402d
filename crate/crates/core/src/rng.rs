//! Seed derivation and random number generation.
//!
//! Every random draw in the simulator comes from a [`ChaCha8Rng`] seeded from
//! a 64-bit value. Seeds for sub-streams are derived with the SplitMix64
//! finalizer so that a block's randomness depends only on
//! `(base_seed, snr_index, block_index)` and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation randomness.
pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function (Steele, Lea, Flood 2014).
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a parent seed with a child index into a new 64-bit seed.
pub fn mix(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(GOLDEN_GAMMA))
}

/// Seed of one SNR grid point.
pub fn point_seed(base_seed: u64, snr_index: usize) -> u64 {
    mix(base_seed, snr_index as u64)
}

/// Seed of one Monte Carlo block.
pub fn block_seed(base_seed: u64, snr_index: usize, block_index: u64) -> u64 {
    mix(point_seed(base_seed, snr_index), block_index)
}

/// Named sub-streams of a block seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Payload = 1,
    Channel = 2,
    Noise = 3,
    Padding = 4,
}

pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    mix(seed, stream as u64)
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
