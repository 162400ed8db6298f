use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::topology::Edge;
use crate::bits::Bits;

/// A post-quantum key established between two nodes, with the simulator's
/// record of whether the adversary learned it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PqcKey {
    pub key: Bits,
    pub adversary_known: bool,
}

/// Pluggable post-quantum key establishment.
pub trait PqcKem {
    fn establish(&mut self, a: &str, b: &str, key_len: usize) -> PqcKey;
}

/// Deterministic stand-in: keys are SHA-256 expansions of an out-of-band
/// secret, the unordered pair and a per-call counter.
#[derive(Debug, Clone)]
pub struct HashPqc {
    secret: [u8; 32],
    counter: u64,
    broken: BTreeSet<Edge>,
    all_broken: bool,
}

impl HashPqc {
    pub fn new(secret: [u8; 32]) -> Self {
        HashPqc {
            secret,
            counter: 0,
            broken: BTreeSet::new(),
            all_broken: false,
        }
    }

    /// Marks keys for this pair as known to the adversary from now on.
    pub fn break_pair(&mut self, a: &str, b: &str) {
        self.broken.insert(Edge::new(a, b));
    }

    pub fn break_all(&mut self, broken: bool) {
        self.all_broken = broken;
    }
}

impl PqcKem for HashPqc {
    fn establish(&mut self, a: &str, b: &str, key_len: usize) -> PqcKey {
        let edge = Edge::new(a, b);
        let call = self.counter;
        self.counter += 1;
        let mut key = Bits::new();
        let mut block = 0u64;
        while key.len() < key_len {
            let mut h = Sha256::new();
            h.update(b"hyqkd/pqc-double");
            h.update(self.secret);
            for id in [&edge.0, &edge.1] {
                h.update((id.len() as u64).to_be_bytes());
                h.update(id.as_bytes());
            }
            h.update(call.to_be_bytes());
            h.update(block.to_be_bytes());
            key.extend_from(&Bits::from_bytes(&h.finalize()));
            block += 1;
        }
        PqcKey {
            key: key.slice(0, key_len),
            adversary_known: self.all_broken || self.broken.contains(&edge),
        }
    }
}
