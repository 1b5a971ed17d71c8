//! Seeded, splittable random streams.
//!
//! Every random decision in the simulator is drawn from a stream named by
//! `(purpose, round, index, sub)`. The stream id is a hash of that tuple and
//! the underlying generator is ChaCha8 keyed by the experiment seed, so the
//! draws a device sees never depend on how many other draws happened first
//! or on which thread ran them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    Init = 2,
    Sample = 3,
    Partition = 4,
    Straggle = 5,
    Train = 6,
    Quantity = 7,
    Labeler = 8,
    DeviceData = 9,
    ClassParams = 10,
    PowerLaw = 11,
    Fixture = 12,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamRng {
    seed: u64,
    stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl StreamRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Child stream for `(purpose, round, index)`.
    pub fn derive(&self, purpose: Purpose, round: u64, index: u64) -> Self {
        self.derive_sub(purpose, round, index, 0)
    }

    pub fn derive_sub(&self, purpose: Purpose, round: u64, index: u64, sub: u64) -> Self {
        let mut h = splitmix64(self.stream ^ 0x5851_f42d_4c95_7f2d);
        for part in [purpose as u64, round, index, sub] {
            h = splitmix64(h ^ part);
        }
        Self {
            seed: self.seed,
            stream: h,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
