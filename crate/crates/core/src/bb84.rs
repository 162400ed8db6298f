//! The BB84 quantum phase: preparation, transmission and measurement over
//! many positions, producing Alice's and Bob's raw transcripts.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::Bits;
use crate::channel::{
    measure, prepare_pulse, transmit, Basis, ChannelParams, EveModel, IntensityClass,
};
use crate::rng::{rng_from, SessionSeeds};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("n_pulses must be at least 1")]
    NoPulses,
    #[error("decoy_probability {0} must lie in [0, 1)")]
    DecoyProbability(f64),
    #[error("p_z {0} must lie strictly between 0 and 1")]
    BasisProbability(f64),
    #[error("pre-shared basis seed is empty")]
    EmptySharedSeed,
}

/// How each party picks its basis at every position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisStrategy {
    SymmetricRandom,
    AsymmetricRandom { p_z: f64 },
    /// Both parties expand the same secret seed into one basis sequence.
    PresharedSequence { shared_seed: Vec<u8> },
}

impl BasisStrategy {
    pub fn asymmetric(p_z: f64) -> Result<Self, ProtocolError> {
        if p_z > 0.0 && p_z < 1.0 {
            Ok(BasisStrategy::AsymmetricRandom { p_z })
        } else {
            Err(ProtocolError::BasisProbability(p_z))
        }
    }

    pub fn preshared(shared_seed: impl Into<Vec<u8>>) -> Result<Self, ProtocolError> {
        let shared_seed = shared_seed.into();
        if shared_seed.is_empty() {
            return Err(ProtocolError::EmptySharedSeed);
        }
        Ok(BasisStrategy::PresharedSequence { shared_seed })
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            BasisStrategy::SymmetricRandom => Ok(()),
            BasisStrategy::AsymmetricRandom { p_z } => Self::asymmetric(*p_z).map(|_| ()),
            BasisStrategy::PresharedSequence { shared_seed } if shared_seed.is_empty() => {
                Err(ProtocolError::EmptySharedSeed)
            }
            BasisStrategy::PresharedSequence { .. } => Ok(()),
        }
    }
}

/// Basis at `position` of the pre-shared sequence.
///
/// Expander: block `b = position / 256` is `SHA-256("hyqkd/basis/v1" || seed || b as u64 BE)`;
/// the basis is bit `position % 256` of that block, MSB first, `0 -> Z`.
pub fn preshared_basis(shared_seed: &[u8], position: u64) -> Basis {
    let mut h = Sha256::new();
    h.update(b"hyqkd/basis/v1");
    h.update(shared_seed);
    h.update((position / 256).to_be_bytes());
    let block = h.finalize();
    let bit = position % 256;
    Basis::from_bit(block[(bit / 8) as usize] >> (7 - bit % 8))
}

pub fn choose_basis<R: Rng + ?Sized>(strategy: &BasisStrategy, position: u64, rng: &mut R) -> Basis {
    match strategy {
        BasisStrategy::SymmetricRandom => Basis::random(rng),
        BasisStrategy::AsymmetricRandom { p_z } => {
            if rng.random_bool(*p_z) {
                Basis::Z
            } else {
                Basis::X
            }
        }
        BasisStrategy::PresharedSequence { shared_seed } => preshared_basis(shared_seed, position),
    }
}

/// Bits are always drawn with probability 1/2; only the strategy and decoy
/// rate are configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n_pulses: usize,
    pub strategy: BasisStrategy,
    pub decoy_probability: f64,
}

impl ProtocolConfig {
    pub fn new(
        n_pulses: usize,
        strategy: BasisStrategy,
        decoy_probability: f64,
    ) -> Result<Self, ProtocolError> {
        let cfg = ProtocolConfig {
            n_pulses,
            strategy,
            decoy_probability,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_pulses == 0 {
            return Err(ProtocolError::NoPulses);
        }
        if !(0.0..1.0).contains(&self.decoy_probability) {
            return Err(ProtocolError::DecoyProbability(self.decoy_probability));
        }
        self.strategy.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliceRecord {
    pub index: usize,
    pub bit: u8,
    pub basis: Basis,
    pub intensity: IntensityClass,
}

/// Bob's view of one position. `basis` is his choice at every position,
/// detected or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BobRecord {
    pub index: usize,
    pub basis: Basis,
    pub detected: bool,
    pub measured_bit: Option<u8>,
}

impl BobRecord {
    pub fn measured_basis(&self) -> Option<Basis> {
        self.detected.then_some(self.basis)
    }
}

/// Joint per-position view, used for audit dumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseRecord {
    pub index: usize,
    pub bit: u8,
    pub basis: Basis,
    pub intensity: IntensityClass,
    pub detected: bool,
    pub measured_bit: Option<u8>,
    pub measured_basis: Option<Basis>,
}

impl PulseRecord {
    pub fn join(a: &AliceRecord, b: &BobRecord) -> Self {
        debug_assert_eq!(a.index, b.index);
        PulseRecord {
            index: a.index,
            bit: a.bit,
            basis: a.basis,
            intensity: a.intensity,
            detected: b.detected,
            measured_bit: b.measured_bit,
            measured_basis: b.measured_basis(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPhaseOutput {
    pub alice: Vec<AliceRecord>,
    pub bob: Vec<BobRecord>,
}

impl QuantumPhaseOutput {
    pub fn records(&self) -> impl Iterator<Item = PulseRecord> + '_ {
        self.alice.iter().zip(&self.bob).map(|(a, b)| PulseRecord::join(a, b))
    }

    pub fn n_detected(&self) -> usize {
        self.bob.iter().filter(|b| b.detected).count()
    }

    /// Alice's raw key: her bits at detected positions.
    pub fn raw_key_alice(&self) -> Bits {
        self.alice
            .iter()
            .zip(&self.bob)
            .filter(|(_, b)| b.detected)
            .map(|(a, _)| a.bit)
            .collect()
    }

    /// Bob's raw key: his measured bits.
    pub fn raw_key_bob(&self) -> Bits {
        self.bob.iter().filter_map(|b| b.measured_bit).collect()
    }

    /// Line-oriented audit dump, `index,basis,bit,intensity,detected,measured_basis,measured_bit`,
    /// with a header line. Missing measurements are empty fields.
    pub fn dump(&self) -> String {
        let mut out = String::from("index,basis,bit,intensity,detected,measured_basis,measured_bit\n");
        for r in self.records() {
            let mb = r.measured_basis.map(|b| b.to_string()).unwrap_or_default();
            let mbit = r.measured_bit.map(|b| b.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.index, r.basis, r.bit, r.intensity, r.detected as u8, mb, mbit
            );
        }
        out
    }
}

/// Runs preparation, transmission and measurement for `cfg.n_pulses` positions.
pub fn run_quantum_phase(
    cfg: &ProtocolConfig,
    ch: &ChannelParams,
    eve: &EveModel,
    seeds: &SessionSeeds,
) -> Result<QuantumPhaseOutput, ProtocolError> {
    cfg.validate()?;
    let mut alice_rng = rng_from(seeds.alice);
    let mut bob_rng = rng_from(seeds.bob);
    let mut channel_rng = rng_from(seeds.channel);
    let mut eve_rng = rng_from(seeds.eve);

    let mut alice = Vec::with_capacity(cfg.n_pulses);
    let mut bob = Vec::with_capacity(cfg.n_pulses);
    for index in 0..cfg.n_pulses {
        let basis = choose_basis(&cfg.strategy, index as u64, &mut alice_rng);
        let bit = alice_rng.random::<bool>() as u8;
        let intensity = if alice_rng.random_bool(cfg.decoy_probability) {
            IntensityClass::Decoy
        } else {
            IntensityClass::Signal
        };
        let pulse = prepare_pulse(bit, basis, intensity);

        let bob_basis = choose_basis(&cfg.strategy, index as u64, &mut bob_rng);
        let event = transmit(&pulse, ch, eve, &mut channel_rng, &mut eve_rng);
        let measured_bit = event.map(|e| measure(&e.received, bob_basis, &mut bob_rng));

        alice.push(AliceRecord {
            index,
            bit,
            basis,
            intensity,
        });
        bob.push(BobRecord {
            index,
            basis: bob_basis,
            detected: measured_bit.is_some(),
            measured_bit,
        });
    }
    Ok(QuantumPhaseOutput { alice, bob })
}
