//! Key consumers and quantum-risk arithmetic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::postproc::KeyMaterial;

#[derive(Debug, Error, PartialEq)]
pub enum AppError {
    #[error("key of {key} bits is shorter than the {message}-bit message")]
    KeyTooShort { key: usize, message: usize },
    #[error("one-time pad key already used")]
    KeyReuse,
    #[error("{0} must be a finite non-negative number")]
    Negative(&'static str),
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("key length overflow")]
    Overflow,
}

fn pad(message: &Bits, key: &mut KeyMaterial) -> Result<Bits, AppError> {
    if key.len() < message.len() {
        return Err(AppError::KeyTooShort {
            key: key.len(),
            message: message.len(),
        });
    }
    if !key.mark_consumed() {
        return Err(AppError::KeyReuse);
    }
    Ok(message ^ &key.bits().slice(0, message.len()))
}

/// `message XOR key`, consuming the sender's key copy.
pub fn otp_encrypt(message: &Bits, key: &mut KeyMaterial) -> Result<Bits, AppError> {
    pad(message, key)
}

/// `ciphertext XOR key`, consuming the receiver's key copy.
pub fn otp_decrypt(ciphertext: &Bits, key: &mut KeyMaterial) -> Result<Bits, AppError> {
    pad(ciphertext, key)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoscaParams {
    /// Years the data must stay confidential.
    pub shelf_life: f64,
    /// Years needed to migrate to quantum-safe cryptography.
    pub migration: f64,
    /// Years until a quantum computer breaks today's public-key schemes.
    pub threat_horizon: f64,
}

impl MoscaParams {
    pub fn new(shelf_life: f64, migration: f64, threat_horizon: f64) -> Result<Self, AppError> {
        for (name, v) in [
            ("shelf life", shelf_life),
            ("migration time", migration),
            ("threat horizon", threat_horizon),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(AppError::Negative(name));
            }
        }
        Ok(MoscaParams {
            shelf_life,
            migration,
            threat_horizon,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoscaVerdict {
    AtRisk,
    Safe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoscaAssessment {
    pub verdict: MoscaVerdict,
    /// Threat horizon minus (shelf life + migration); negative when at risk.
    pub slack: f64,
}

/// At risk exactly when shelf life plus migration time exceeds the threat
/// horizon; equality is safe.
pub fn mosca_check(p: &MoscaParams) -> MoscaAssessment {
    let exposure = p.shelf_life + p.migration;
    MoscaAssessment {
        verdict: if exposure > p.threat_horizon {
            MoscaVerdict::AtRisk
        } else {
            MoscaVerdict::Safe
        },
        slack: p.threat_horizon - exposure,
    }
}

/// Symmetric key length giving the same margin against a quantum search.
pub fn grover_adjusted_length(classical_len: usize) -> Result<usize, AppError> {
    if classical_len == 0 {
        return Err(AppError::NotPositive("classical key length"));
    }
    classical_len.checked_mul(2).ok_or(AppError::Overflow)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CipherKeyRequest {
    pub key_len: f64,
    /// Seconds between key changes.
    pub renewal_interval: f64,
    /// Secret key rate available on the link, in bits per second.
    pub available_rate: f64,
}

impl CipherKeyRequest {
    pub fn new(key_len: f64, renewal_interval: f64, available_rate: f64) -> Result<Self, AppError> {
        for (name, v) in [
            ("key length", key_len),
            ("renewal interval", renewal_interval),
            ("available rate", available_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(AppError::NotPositive(name));
            }
        }
        Ok(CipherKeyRequest {
            key_len,
            renewal_interval,
            available_rate,
        })
    }

    /// Bits per second the renewal schedule consumes.
    pub fn demand(&self) -> f64 {
        self.key_len / self.renewal_interval
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Renewal {
    Feasible { headroom: f64 },
    Infeasible { deficit: f64 },
}

pub fn key_renewal_feasibility(req: &CipherKeyRequest) -> Renewal {
    let demand = req.demand();
    if demand <= req.available_rate {
        Renewal::Feasible {
            headroom: req.available_rate - demand,
        }
    } else {
        Renewal::Infeasible {
            deficit: demand - req.available_rate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::Stage;

    fn key(bits: &str) -> KeyMaterial {
        KeyMaterial::new(Bits::parse(bits).unwrap(), Stage::Final)
    }

    #[test]
    fn otp_message_equal_to_key_gives_zeros() {
        let d = otp_encrypt(&Bits::parse("1011").unwrap(), &mut key("1011")).unwrap();
        assert_eq!(d, Bits::zeros(4));
    }

    #[test]
    fn otp_conditions() {
        let mut k = key("110");
        assert_eq!(
            otp_encrypt(&Bits::parse("1111").unwrap(), &mut k),
            Err(AppError::KeyTooShort { key: 3, message: 4 })
        );
        assert!(!k.is_consumed());
        otp_encrypt(&Bits::parse("01").unwrap(), &mut k).unwrap();
        assert_eq!(otp_encrypt(&Bits::parse("01").unwrap(), &mut k), Err(AppError::KeyReuse));
    }

    #[test]
    fn mosca_examples() {
        let a = mosca_check(&MoscaParams::new(10.0, 5.0, 12.0).unwrap());
        assert_eq!((a.verdict, a.slack), (MoscaVerdict::AtRisk, -3.0));
        let b = mosca_check(&MoscaParams::new(1.0, 1.0, 10.0).unwrap());
        assert_eq!((b.verdict, b.slack), (MoscaVerdict::Safe, 8.0));
        let c = mosca_check(&MoscaParams::new(4.0, 6.0, 10.0).unwrap());
        assert_eq!(c.verdict, MoscaVerdict::Safe);
        assert!(MoscaParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(MoscaParams::new(f64::NAN, 0.0, 0.0).is_err());
    }

    #[test]
    fn grover() {
        assert_eq!(grover_adjusted_length(128), Ok(256));
        assert_eq!(grover_adjusted_length(256), Ok(512));
        assert!(grover_adjusted_length(0).is_err());
        assert_eq!(grover_adjusted_length(usize::MAX), Err(AppError::Overflow));
    }

    #[test]
    fn renewal() {
        let r = key_renewal_feasibility(&CipherKeyRequest::new(256.0, 60.0, 10.0).unwrap());
        assert!(matches!(r, Renewal::Feasible { headroom } if (headroom - (10.0 - 256.0 / 60.0)).abs() < 1e-12));
        let r = key_renewal_feasibility(&CipherKeyRequest::new(256.0, 10.0, 10.0).unwrap());
        assert!(matches!(r, Renewal::Infeasible { deficit } if (deficit - 15.6).abs() < 1e-9));
        let r = key_renewal_feasibility(&CipherKeyRequest::new(100.0, 10.0, 10.0).unwrap());
        assert_eq!(r, Renewal::Feasible { headroom: 0.0 });
        assert!(CipherKeyRequest::new(0.0, 1.0, 1.0).is_err());
    }
}
