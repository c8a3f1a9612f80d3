//! Counter-keyed random streams.
//!
//! Every random draw is addressed by a path of integer tags (master seed,
//! cell, replicate, item, measurement index, ...). Identical paths give
//! identical draws regardless of evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tag for draws that build an instance (true values).
pub const TAG_INSTANCE: u64 = 0x1157;
/// Tag for observation noise.
pub const TAG_OBSERVATION: u64 = 0x0b5e;
/// Tag for estimator Monte-Carlo seeds.
pub const TAG_ESTIMATOR: u64 = 0xe571;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(splitmix64(seed))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    /// Derives the key one level down the path.
    pub fn child(self, tag: u64) -> Self {
        StreamKey(splitmix64(
            self.0 ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019)),
        ))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// One standard normal draw addressed by this key.
    pub fn standard_normal(self) -> f64 {
        StandardNormal.sample(&mut self.rng())
    }

    /// Standard normal noise for the `index`-th measurement of `item`.
    pub fn observation_noise(self, item: usize, index: u32) -> f64 {
        self.child(TAG_OBSERVATION)
            .child(item as u64)
            .child(index as u64)
            .standard_normal()
    }
}
