//! Seed derivation.
//!
//! Every simulated party owns a ChaCha20 stream keyed by
//! `SHA-256(master_seed_be || label)`. Labels are fixed strings such as
//! `"round/3/alice"`, so adding a party never perturbs another party's stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha20Rng;

pub fn derive_seed(master: u64, label: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master.to_be_bytes());
    h.update(label.as_bytes());
    h.finalize().into()
}

pub fn derive_rng(master: u64, label: &str) -> SimRng {
    ChaCha20Rng::from_seed(derive_seed(master, label))
}

/// Independent random sources for one quantum-phase run.
#[derive(Debug, Clone)]
pub struct SessionSeeds {
    pub alice: [u8; 32],
    pub bob: [u8; 32],
    pub channel: [u8; 32],
    pub eve: [u8; 32],
}

impl SessionSeeds {
    pub fn derive(master: u64, scope: &str) -> Self {
        SessionSeeds {
            alice: derive_seed(master, &format!("{scope}/alice")),
            bob: derive_seed(master, &format!("{scope}/bob")),
            channel: derive_seed(master, &format!("{scope}/channel")),
            eve: derive_seed(master, &format!("{scope}/eve")),
        }
    }

    pub fn from_u64(master: u64) -> Self {
        Self::derive(master, "session")
    }
}

pub fn rng_from(seed: [u8; 32]) -> SimRng {
    ChaCha20Rng::from_seed(seed)
}
