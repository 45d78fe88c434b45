//! Splittable, named random streams.
//!
//! Every sampling operation takes an explicit RNG. A [`SeedStream`] is a
//! cheap value naming one position in a tree of streams; deriving children
//! by label or index gives each party, channel and trial its own
//! independent ChaCha stream under a single user-facing seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
    path: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, path: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream identified by a label, e.g. `"tp2"` or `"channel/s1"`.
    pub fn derive(&self, label: &str) -> Self {
        Self { seed: self.seed, path: splitmix64(self.path ^ splitmix64(fnv1a(label))) }
    }

    /// Child stream identified by an index (trial number, user number, ...).
    pub fn index(&self, i: u64) -> Self {
        Self { seed: self.seed, path: splitmix64(self.path.rotate_left(17) ^ splitmix64(i ^ 0xA5A5_A5A5_5A5A_5A5A)) }
    }

    pub fn rng(&self) -> SimRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.path);
        rng
    }
}
