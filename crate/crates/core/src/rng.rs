//! Counter-based random streams.
//!
//! Every draw in the laboratory is addressed by `(seed, experiment, shard,
//! word position)`. The generator is ChaCha12: the 256-bit key carries the
//! seed and the experiment id, the 64-bit stream selector carries the shard,
//! and the block counter is the draw index. Parallel schedules therefore
//! cannot change which numbers a shard sees.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Identifier recorded in run records.
pub const RNG_ALGORITHM: &str = "chacha12-counter";

pub type Stream = ChaCha12Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub experiment: u64,
    pub shard: u64,
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        Self { seed, experiment: 0, shard: 0 }
    }

    pub fn with_experiment(self, experiment: u64) -> Self {
        Self { experiment, ..self }
    }

    /// Experiment id taken from a stable hash of `label`.
    pub fn labeled(self, label: &str) -> Self {
        self.with_experiment(fnv1a(label.as_bytes()))
    }

    pub fn with_shard(self, shard: u64) -> Self {
        Self { shard, ..self }
    }

    /// Child key for an independent sub-computation.
    pub fn derive(self, tag: u64) -> Self {
        Self {
            experiment: splitmix64(self.experiment ^ splitmix64(tag.wrapping_add(0x632b_e59b_d9b4_e019))),
            ..self
        }
    }

    pub fn stream(&self) -> Stream {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(self.shard);
        rng
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
