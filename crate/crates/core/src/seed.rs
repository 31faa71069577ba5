//! Counter-style substream derivation.
//!
//! Every random stream is seeded from SHA-256 of the master seed and a tuple of
//! labels, so a stream depends only on its coordinates and never on the order
//! in which work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Builder for a labelled substream of a master seed.
#[derive(Clone)]
pub struct StreamKey {
    hasher: Sha256,
}

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(b"dgp-stream-v1");
        hasher.update(master_seed.to_le_bytes());
        Self { hasher }
    }

    pub fn with_str(mut self, label: &str) -> Self {
        self.hasher.update((label.len() as u64).to_le_bytes());
        self.hasher.update(label.as_bytes());
        self
    }

    pub fn with_u64(mut self, value: u64) -> Self {
        self.hasher.update([0xff]);
        self.hasher.update(value.to_le_bytes());
        self
    }

    pub fn rng(self) -> ChaCha8Rng {
        let digest = self.hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }
}
