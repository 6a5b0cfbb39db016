//! Seeded randomness split into independent per-party streams.
//!
//! Every stream is a ChaCha12 instance whose key is derived from the master
//! seed and a label path, so adding a new consumer never perturbs the values
//! an existing one sees.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// A node in the derivation tree. Cheap to clone and pass by value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    key: [u8; 32],
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"qotmpc/seed-root/v1");
        h.update(seed.to_be_bytes());
        SeedTree { key: h.finalize().into() }
    }

    pub fn child(&self, label: &str) -> SeedTree {
        self.derive(label.as_bytes(), None)
    }

    pub fn indexed(&self, label: &str, index: u64) -> SeedTree {
        self.derive(label.as_bytes(), Some(index))
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha12Rng::from_seed(self.key)
    }

    pub fn stream(&self, label: &str) -> StreamRng {
        self.child(label).rng()
    }

    fn derive(&self, label: &[u8], index: Option<u64>) -> SeedTree {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update((label.len() as u32).to_be_bytes());
        h.update(label);
        if let Some(i) = index {
            h.update(i.to_be_bytes());
        }
        SeedTree { key: h.finalize().into() }
    }
}

/// Stream labels for the two protocol parties and the simulated channel.
pub mod streams {
    pub const ALICE: &str = "alice";
    pub const BOB: &str = "bob";
    pub const OPTICS_SOURCE: &str = "optics/source";
    pub const OPTICS_CHANNEL: &str = "optics/channel";
}
