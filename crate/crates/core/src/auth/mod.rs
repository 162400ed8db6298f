//! Public-channel authentication: Wegman-Carter tags keyed from a one-time
//! pool, hash-based one-time signatures for the first round, and the split of
//! each final key into next-round pool bits and application key.

pub mod mac;
pub mod ots;
pub mod pool;

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::bits::Bits;
use crate::postproc::{KeyMaterial, Stage};

pub use mac::{wc_tag, wc_verify, MacTag, RejectReason, Verdict, DEFAULT_TAG_LEN};
pub use ots::{ots_keygen, ots_sign, ots_verify, OtsKeypair, OtsParams, OtsPublicKey, OtsScheme, OtsSignature};
pub use pool::{AuthKeyPool, Segment};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuthError {
    #[error("authentication pool exhausted: need {needed} bits, {available} available")]
    PoolExhausted { needed: usize, available: usize },
    #[error("pool desynchronised: expected offset {expected}, peer used {got}")]
    Desync { expected: usize, got: usize },
    #[error("tag length {0} outside 1..={max}", max = mac::MAX_TAG_LEN)]
    TagLength(usize),
    #[error("one-time signing key already used")]
    KeyReuse,
    #[error("no unused one-time signing keys left")]
    OtsExhausted,
    #[error("invalid one-time signature parameters: {0}")]
    OtsParams(String),
    #[error("malformed public key blob: {0}")]
    Blob(String),
    #[error("unsupported public key blob version {0}")]
    BlobVersion(u32),
    #[error("final key of {have} bits cannot cover a {need}-bit authentication reserve")]
    InsufficientKey { have: usize, need: usize },
    #[error("expected a final key, got a {0} key")]
    WrongStage(Stage),
    #[error("round numbers start at 1")]
    InvalidRound,
    #[error("round 1 has neither a pre-shared pool nor one-time signing keys")]
    CannotAuthenticate,
}

/// Splits a final key into the next round's pool bits (the leading
/// `reserve` bits) and the application key (the rest).
pub fn grow_keys(final_key: &KeyMaterial, reserve: usize) -> Result<(Bits, KeyMaterial), AuthError> {
    if final_key.stage() != Stage::Final {
        return Err(AuthError::WrongStage(final_key.stage()));
    }
    if final_key.len() < reserve {
        return Err(AuthError::InsufficientKey {
            have: final_key.len(),
            need: reserve,
        });
    }
    let (pool_bits, app) = final_key.bits().split_at(reserve);
    Ok((pool_bits, KeyMaterial::new(app, Stage::Final)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthMode {
    Ots,
    WegmanCarter,
}

impl fmt::Display for AuthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AuthMode::Ots => "ots",
            AuthMode::WegmanCarter => "wegman-carter",
        })
    }
}

/// Picks how a round authenticates. A funded pool always wins; round 1 with
/// an empty pool falls back to one-time signatures.
pub fn bootstrap_round_auth(round: u32, pool: &AuthKeyPool, ots: &OtsContext) -> Result<AuthMode, AuthError> {
    if round == 0 {
        return Err(AuthError::InvalidRound);
    }
    if !pool.is_empty() || round > 1 {
        return Ok(AuthMode::WegmanCarter);
    }
    if ots.remaining() > 0 {
        Ok(AuthMode::Ots)
    } else {
        Err(AuthError::CannotAuthenticate)
    }
}

/// One party's one-time signature state: its own stock of signing keys and
/// the peer's public keys, received out of band as blobs.
#[derive(Debug, Clone, Default)]
pub struct OtsContext {
    own: Vec<OtsKeypair>,
    peer: Vec<OtsPublicKey>,
    next_own: usize,
    next_peer: usize,
    signed: Vec<usize>,
    verified: Vec<usize>,
}

impl OtsContext {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, params: OtsParams, count: usize) -> Result<Self, AuthError> {
        let own = (0..count).map(|_| ots_keygen(rng, params)).collect::<Result<_, _>>()?;
        Ok(OtsContext {
            own,
            ..Self::default()
        })
    }

    pub fn public_blobs(&self) -> Vec<Vec<u8>> {
        self.own.iter().map(|k| k.public().to_blob()).collect()
    }

    pub fn import_peer(&mut self, blobs: &[Vec<u8>]) -> Result<(), AuthError> {
        for b in blobs {
            self.peer.push(OtsPublicKey::from_blob(b)?);
        }
        Ok(())
    }

    /// Unused signing keys left.
    pub fn remaining(&self) -> usize {
        self.own.len() - self.next_own
    }

    pub fn sign_next(&mut self, message: &Bits) -> Result<(usize, OtsSignature), AuthError> {
        let index = self.next_own;
        let kp = self.own.get_mut(index).ok_or(AuthError::OtsExhausted)?;
        let sig = ots_sign(message, kp)?;
        self.next_own += 1;
        self.signed.push(index);
        Ok((index, sig))
    }

    /// Verifies with the peer key `index`, which must be the next unused one.
    pub fn verify_next(&mut self, message: &Bits, index: usize, signature: &OtsSignature) -> bool {
        if index != self.next_peer || index >= self.peer.len() {
            return false;
        }
        self.next_peer += 1;
        self.verified.push(index);
        ots_verify(message, signature, &self.peer[index])
    }

    pub fn signed_log(&self) -> &[usize] {
        &self.signed
    }

    pub fn verified_log(&self) -> &[usize] {
        &self.verified
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn grow_split() {
        let bits = Bits::random(&mut derive_rng(1, "grow"), 1000);
        let key = KeyMaterial::new(bits.clone(), Stage::Final);
        let (pool, app) = grow_keys(&key, 200).unwrap();
        assert_eq!((pool.len(), app.len()), (200, 800));
        let mut joined = pool.clone();
        joined.extend_from(app.bits());
        assert_eq!(joined, bits);
        assert!(matches!(grow_keys(&key, 1001), Err(AuthError::InsufficientKey { .. })));
        let verified = KeyMaterial::new(bits, Stage::Verified);
        assert!(matches!(grow_keys(&verified, 1), Err(AuthError::WrongStage(Stage::Verified))));
    }

    #[test]
    fn bootstrap_modes() {
        let mut rng = derive_rng(2, "boot");
        let ots = OtsContext::generate(&mut rng, OtsParams::lamport(64, 32), 2).unwrap();
        let none = OtsContext::default();
        let empty = AuthKeyPool::new();
        let funded = AuthKeyPool::with_bits(Bits::zeros(10));
        assert_eq!(bootstrap_round_auth(1, &empty, &ots), Ok(AuthMode::Ots));
        assert_eq!(bootstrap_round_auth(2, &funded, &none), Ok(AuthMode::WegmanCarter));
        assert_eq!(bootstrap_round_auth(1, &funded, &ots), Ok(AuthMode::WegmanCarter));
        assert_eq!(bootstrap_round_auth(1, &empty, &none), Err(AuthError::CannotAuthenticate));
        assert_eq!(bootstrap_round_auth(0, &funded, &ots), Err(AuthError::InvalidRound));
    }

    #[test]
    fn context_signs_in_order() {
        let mut rng = derive_rng(3, "ctx");
        let mut alice = OtsContext::generate(&mut rng, OtsParams::lamport(64, 32), 2).unwrap();
        let mut bob = OtsContext::default();
        bob.import_peer(&alice.public_blobs()).unwrap();
        let m = Bits::parse("110").unwrap();
        let (i, sig) = alice.sign_next(&m).unwrap();
        assert!(!bob.verify_next(&m, i + 1, &sig));
        assert!(bob.verify_next(&m, i, &sig));
        alice.sign_next(&m).unwrap();
        assert_eq!(alice.sign_next(&m).unwrap_err(), AuthError::OtsExhausted);
        assert_eq!(alice.signed_log(), &[0, 1]);
    }
}
