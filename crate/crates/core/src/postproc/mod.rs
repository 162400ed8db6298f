//! Classical post-processing: announcements and sifting, eavesdropping
//! estimation, error correction with verification, and privacy
//! amplification, with every public disclosure booked in a [`LeakageLedger`].

pub mod cascade;
pub mod estimate;
pub mod key;
pub mod ldpc;
pub mod ledger;
pub mod length;
pub mod reconcile;
pub mod sift;
pub mod toeplitz;

use thiserror::Error;

pub use estimate::{estimate_eavesdropping, AbortReason, Decision, EstimationResult, DEFAULT_THRESHOLD};
pub use key::{KeyMaterial, Stage};
pub use ledger::{Disclosure, LeakageLedger};
pub use length::{binary_entropy, compute_final_length};
pub use reconcile::{correct_errors, CodeParams, Reconciliation};
pub use sift::{announce_and_sift, AnnouncementBundle, SiftOutcome};
pub use toeplitz::{verify_keys, ToeplitzSeed};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocError {
    #[error("length mismatch: {left} vs {right} bits")]
    LengthMismatch { left: usize, right: usize },
    #[error("transcripts misaligned at index {0} / {1}")]
    Misaligned(usize, usize),
    #[error("{0}")]
    DimensionMismatch(String),
    #[error("probability {0} outside [0, 1]")]
    Domain(f64),
    #[error("abort threshold {0} must lie in (0, 0.5)")]
    InvalidThreshold(f64),
    #[error("error correction failed on block {block}")]
    DecodeFailure { block: usize },
    #[error("key stage cannot move from {from} to {to}")]
    StageTransition { from: Stage, to: Stage },
    #[error("expected a {expected} key, got {actual}")]
    WrongStage { expected: Stage, actual: Stage },
    #[error("LDPC matrix line {line}: {message}")]
    CodeFormat { line: usize, message: String },
}

/// Compresses a verified key with the Toeplitz matrix fixed by `seed`.
pub fn amplify_privacy(key: KeyMaterial, seed: &ToeplitzSeed, out_len: usize) -> Result<KeyMaterial, PostprocError> {
    if key.stage() != Stage::Verified {
        return Err(PostprocError::WrongStage {
            expected: Stage::Verified,
            actual: key.stage(),
        });
    }
    if out_len > key.len() || seed.out_len() != out_len || seed.in_len() != key.len() {
        return Err(PostprocError::DimensionMismatch(format!(
            "cannot hash {} bits to {out_len} with a {}x{} seed",
            key.len(),
            seed.out_len(),
            seed.in_len()
        )));
    }
    let out = seed.hash(key.bits())?;
    key.transform(Stage::Final, out)
}
