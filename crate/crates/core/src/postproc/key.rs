use std::fmt;

use serde::{Deserialize, Serialize};

use super::PostprocError;
use crate::bits::Bits;

/// Lifecycle stage of a key. Transitions only move forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Raw,
    Sifted,
    Verified,
    Final,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A length-tagged bit string with a lifecycle stage and a one-time-use flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyMaterial {
    bits: Bits,
    stage: Stage,
    consumed: bool,
}

impl KeyMaterial {
    pub fn new(bits: Bits, stage: Stage) -> Self {
        KeyMaterial {
            bits,
            stage,
            consumed: false,
        }
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn into_bits(self) -> Bits {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Marks the key used. Returns `false` if it already was.
    pub fn mark_consumed(&mut self) -> bool {
        !std::mem::replace(&mut self.consumed, true)
    }

    /// Moves to a later stage, keeping the bits.
    pub fn promote(self, stage: Stage) -> Result<Self, PostprocError> {
        self.replace(stage, None)
    }

    /// Moves to a later stage with new content (e.g. after hashing).
    pub fn transform(self, stage: Stage, bits: Bits) -> Result<Self, PostprocError> {
        self.replace(stage, Some(bits))
    }

    fn replace(self, stage: Stage, bits: Option<Bits>) -> Result<Self, PostprocError> {
        if stage <= self.stage {
            return Err(PostprocError::StageTransition {
                from: self.stage,
                to: stage,
            });
        }
        Ok(KeyMaterial {
            bits: bits.unwrap_or(self.bits),
            stage,
            consumed: self.consumed,
        })
    }
}
