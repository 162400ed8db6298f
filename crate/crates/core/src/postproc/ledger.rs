use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// What a public-channel payload discloses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Disclosure {
    /// Detection positions, bases, intensity classes, X-basis sample bits.
    Sifting,
    /// Error-correction syndromes and fallback parities.
    Syndrome,
    /// Verification hash tags.
    Verification,
    /// Public random seeds (hash selection); independent of the key.
    Seed,
    /// Status flags (reconciliation outcome, verification verdict).
    Control,
}

impl Disclosure {
    pub const ALL: [Disclosure; 5] = [
        Disclosure::Sifting,
        Disclosure::Syndrome,
        Disclosure::Verification,
        Disclosure::Seed,
        Disclosure::Control,
    ];
}

/// Running count of bits disclosed on the public channel in one session.
///
/// Counters only grow. Only `syndrome_bits` and `verification_bits` reduce
/// the final key length; the other categories carry no key information.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageLedger {
    pub sifting_disclosed: u64,
    pub syndrome_bits: u64,
    pub verification_bits: u64,
    pub seed_bits: u64,
    pub control_bits: u64,
}

impl LeakageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, category: Disclosure, bits: u64) {
        *self.counter_mut(category) += bits;
    }

    pub fn get(&self, category: Disclosure) -> u64 {
        match category {
            Disclosure::Sifting => self.sifting_disclosed,
            Disclosure::Syndrome => self.syndrome_bits,
            Disclosure::Verification => self.verification_bits,
            Disclosure::Seed => self.seed_bits,
            Disclosure::Control => self.control_bits,
        }
    }

    fn counter_mut(&mut self, category: Disclosure) -> &mut u64 {
        match category {
            Disclosure::Sifting => &mut self.sifting_disclosed,
            Disclosure::Syndrome => &mut self.syndrome_bits,
            Disclosure::Verification => &mut self.verification_bits,
            Disclosure::Seed => &mut self.seed_bits,
            Disclosure::Control => &mut self.control_bits,
        }
    }

    /// Bits that count against the secret key.
    pub fn key_leakage(&self) -> u64 {
        self.syndrome_bits + self.verification_bits
    }

    pub fn total(&self) -> u64 {
        Disclosure::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

impl AddAssign for LeakageLedger {
    fn add_assign(&mut self, rhs: Self) {
        for c in Disclosure::ALL {
            self.record(c, rhs.get(c));
        }
    }
}
