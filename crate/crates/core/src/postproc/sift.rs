//! Announcements and key sifting.
//!
//! Only the bits of detected, signal-intensity positions where both parties
//! used `Z` form the key. Signal positions where both used `X` are disclosed
//! in full as the error-estimation sample.

use super::key::{KeyMaterial, Stage};
use super::ledger::{Disclosure, LeakageLedger};
use super::PostprocError;
use crate::bb84::{AliceRecord, BobRecord};
use crate::bits::Bits;
use crate::channel::{Basis, IntensityClass};

/// Everything said on the public channel during announcements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnouncementBundle {
    pub n_positions: usize,
    pub detected_indices: Vec<usize>,
    /// `(alice, bob)` bases, aligned with `detected_indices`.
    pub basis_disclosures: Vec<(Basis, Basis)>,
    /// Alice's intensity classes, aligned with `detected_indices`.
    pub intensity_disclosures: Vec<IntensityClass>,
    /// `(index, alice_bit, bob_bit)` for detected signal positions measured in `X` by both.
    pub x_basis_bits: Vec<(usize, u8, u8)>,
}

impl AnnouncementBundle {
    /// Bob: detection bitmap over all positions, then his bases at detected positions.
    pub fn bob_announcement(&self) -> Bits {
        let mut bitmap = Bits::zeros(self.n_positions);
        for &i in &self.detected_indices {
            bitmap.set(i, 1);
        }
        bitmap.extend_from(&self.basis_disclosures.iter().map(|(_, b)| b.as_bit()).collect());
        bitmap
    }

    /// Alice: her bases, intensity classes, then her X-sample bits.
    pub fn alice_announcement(&self) -> Bits {
        let mut out: Bits = self.basis_disclosures.iter().map(|(a, _)| a.as_bit()).collect();
        out.extend_from(&self.intensity_disclosures.iter().map(|c| c.as_bit()).collect());
        out.extend_from(&self.x_basis_bits.iter().map(|&(_, a, _)| a).collect());
        out
    }

    /// Bob: his X-sample bits.
    pub fn bob_x_disclosure(&self) -> Bits {
        self.x_basis_bits.iter().map(|&(_, _, b)| b).collect()
    }

    pub fn disclosed_bits(&self) -> u64 {
        (self.n_positions + 3 * self.detected_indices.len() + 2 * self.x_basis_bits.len()) as u64
    }
}

#[derive(Debug, Clone)]
pub struct SiftOutcome {
    pub sifted_alice: KeyMaterial,
    pub sifted_bob: KeyMaterial,
    pub sifted_indices: Vec<usize>,
    pub x_sample: Vec<(u8, u8)>,
    pub bundle: AnnouncementBundle,
    pub ledger: LeakageLedger,
}

pub fn announce_and_sift(alice: &[AliceRecord], bob: &[BobRecord]) -> Result<SiftOutcome, PostprocError> {
    if alice.len() != bob.len() {
        return Err(PostprocError::LengthMismatch {
            left: alice.len(),
            right: bob.len(),
        });
    }
    let mut bundle = AnnouncementBundle {
        n_positions: alice.len(),
        detected_indices: Vec::new(),
        basis_disclosures: Vec::new(),
        intensity_disclosures: Vec::new(),
        x_basis_bits: Vec::new(),
    };
    let mut sifted_indices = Vec::new();
    let mut key_a = Bits::new();
    let mut key_b = Bits::new();

    for (a, b) in alice.iter().zip(bob) {
        if a.index != b.index {
            return Err(PostprocError::Misaligned(a.index, b.index));
        }
        let Some(measured) = b.measured_bit else { continue };
        bundle.detected_indices.push(a.index);
        bundle.basis_disclosures.push((a.basis, b.basis));
        bundle.intensity_disclosures.push(a.intensity);
        if a.intensity != IntensityClass::Signal {
            continue;
        }
        match (a.basis, b.basis) {
            (Basis::Z, Basis::Z) => {
                sifted_indices.push(a.index);
                key_a.push(a.bit);
                key_b.push(measured);
            }
            (Basis::X, Basis::X) => bundle.x_basis_bits.push((a.index, a.bit, measured)),
            _ => {}
        }
    }

    let mut ledger = LeakageLedger::new();
    ledger.record(Disclosure::Sifting, bundle.disclosed_bits());
    let x_sample = bundle.x_basis_bits.iter().map(|&(_, a, b)| (a, b)).collect();
    Ok(SiftOutcome {
        sifted_alice: KeyMaterial::new(key_a, Stage::Sifted),
        sifted_bob: KeyMaterial::new(key_b, Stage::Sifted),
        sifted_indices,
        x_sample,
        bundle,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use IntensityClass::{Decoy as D, Signal as S};

    fn records(rows: &[(bool, IntensityClass, Basis, Basis)]) -> (Vec<AliceRecord>, Vec<BobRecord>) {
        rows.iter()
            .enumerate()
            .map(|(index, &(det, intensity, ab, bb))| {
                let bit = (index % 2) as u8;
                (
                    AliceRecord {
                        index,
                        bit,
                        basis: ab,
                        intensity,
                    },
                    BobRecord {
                        index,
                        basis: bb,
                        detected: det,
                        measured_bit: det.then_some(bit),
                    },
                )
            })
            .unzip()
    }

    #[test]
    fn sift_rule_on_six_positions() {
        use Basis::{X, Z};
        let (a, b) = records(&[
            (true, S, Z, Z),
            (true, D, Z, Z),
            (false, S, Z, Z),
            (true, S, X, X),
            (true, S, Z, X),
            (true, S, Z, Z),
        ]);
        let out = announce_and_sift(&a, &b).unwrap();
        assert_eq!(out.sifted_indices, vec![0, 5]);
        assert_eq!(out.sifted_alice.len(), 2);
        assert_eq!(out.bundle.x_basis_bits.iter().map(|x| x.0).collect::<Vec<_>>(), vec![3]);
        assert_eq!(out.bundle.detected_indices, vec![0, 1, 3, 4, 5]);
        // 6 bitmap + 3 * 5 detected + 2 * 1 sample
        assert_eq!(out.ledger.sifting_disclosed, 23);
        let announced = out.bundle.bob_announcement().len()
            + out.bundle.alice_announcement().len()
            + out.bundle.bob_x_disclosure().len();
        assert_eq!(announced as u64, out.ledger.sifting_disclosed);
    }

    #[test]
    fn everything_kept_when_all_z_signal() {
        let (a, b) = records(&[(true, S, Basis::Z, Basis::Z); 10]);
        let out = announce_and_sift(&a, &b).unwrap();
        assert_eq!(out.sifted_alice.len(), 10);
        assert!(out.x_sample.is_empty());
        assert_eq!(out.sifted_alice, out.sifted_bob);
    }

    #[test]
    fn no_detections_gives_empty_sift() {
        let (a, b) = records(&[(false, S, Basis::Z, Basis::Z); 10]);
        let out = announce_and_sift(&a, &b).unwrap();
        assert!(out.sifted_alice.is_empty());
        assert!(out.x_sample.is_empty());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (a, b) = records(&[(true, S, Basis::Z, Basis::Z); 3]);
        assert!(announce_and_sift(&a, &b[..2]).is_err());
    }
}
