//! Toeplitz hashing over GF(2).
//!
//! An `out_len x in_len` Toeplitz matrix is fixed by `in_len + out_len - 1`
//! seed bits with `T[i][j] = seed[i + in_len - 1 - j]`. So the first row is
//! the first `in_len` seed bits reversed and the first column is
//! `seed[in_len - 1..]`.

use rand::Rng;

use super::ledger::{Disclosure, LeakageLedger};
use super::PostprocError;
use crate::bits::Bits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: Bits,
    in_len: usize,
    out_len: usize,
}

pub fn seed_len(in_len: usize, out_len: usize) -> usize {
    if in_len == 0 || out_len == 0 {
        0
    } else {
        in_len + out_len - 1
    }
}

impl ToeplitzSeed {
    pub fn new(bits: Bits, in_len: usize, out_len: usize) -> Result<Self, PostprocError> {
        let expected = seed_len(in_len, out_len);
        if bits.len() != expected {
            return Err(PostprocError::DimensionMismatch(format!(
                "Toeplitz seed for {out_len}x{in_len} needs {expected} bits, got {}",
                bits.len()
            )));
        }
        Ok(ToeplitzSeed {
            bits,
            in_len,
            out_len,
        })
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, in_len: usize, out_len: usize) -> Self {
        ToeplitzSeed {
            bits: Bits::random(rng, seed_len(in_len, out_len)),
            in_len,
            out_len,
        }
    }

    /// Builds the seed from the matrix's first column and first row, which
    /// must agree on the corner entry.
    pub fn from_column_and_row(column: &Bits, row: &Bits) -> Result<Self, PostprocError> {
        let (m, n) = (column.len(), row.len());
        if m == 0 || n == 0 || column[0] != row[0] {
            return Err(PostprocError::DimensionMismatch(
                "first column and first row must be non-empty and share the corner".into(),
            ));
        }
        let bits: Bits = (0..n)
            .map(|k| row[n - 1 - k])
            .chain((1..m).map(|i| column[i]))
            .collect();
        Self::new(bits, n, m)
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    /// Matrix entry `T[i][j]`.
    pub fn entry(&self, i: usize, j: usize) -> u8 {
        self.bits[i + self.in_len - 1 - j]
    }

    /// `T * input` over GF(2).
    ///
    /// Row `i` against `input` is the parity of `seed[i..i + n] & reverse(input)`,
    /// so each output bit is a word-aligned sliding window.
    pub fn hash(&self, input: &Bits) -> Result<Bits, PostprocError> {
        if input.len() != self.in_len {
            return Err(PostprocError::DimensionMismatch(format!(
                "Toeplitz input has {} bits, matrix expects {}",
                input.len(),
                self.in_len
            )));
        }
        if self.out_len == 0 || self.in_len == 0 {
            return Ok(Bits::zeros(self.out_len));
        }
        let n = self.in_len;
        let reversed: Bits = (0..n).map(|l| input[n - 1 - l]).collect();
        let x = reversed.to_words();
        let mut s = self.bits.to_words();
        s.push(0);
        let nw = x.len();

        let mut out = Bits::zeros(self.out_len);
        for i in 0..self.out_len {
            let (q, r) = (i / 64, i % 64);
            let mut acc = 0u64;
            for k in 0..nw {
                let lo = s[q + k];
                let hi = s.get(q + k + 1).copied().unwrap_or(0);
                let w = if r == 0 { lo } else { (lo >> r) | (hi << (64 - r)) };
                acc ^= w & x[k];
            }
            out.set(i, (acc.count_ones() & 1) as u8);
        }
        Ok(out)
    }
}

/// Compares Toeplitz tags of both keys. The tag length `t` is the seed's
/// output length and `t` bits are booked as verification leakage.
pub fn verify_keys(
    key_a: &Bits,
    key_b: &Bits,
    seed: &ToeplitzSeed,
    ledger: &mut LeakageLedger,
) -> Result<bool, PostprocError> {
    if key_a.len() != key_b.len() {
        return Err(PostprocError::LengthMismatch {
            left: key_a.len(),
            right: key_b.len(),
        });
    }
    let tag_a = seed.hash(key_a)?;
    let tag_b = seed.hash(key_b)?;
    ledger.record(Disclosure::Verification, seed.out_len() as u64);
    Ok(tag_a == tag_b)
}
