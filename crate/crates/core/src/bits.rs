//! Unpacked bit strings.
//!
//! Keys in this crate are short enough (tens of kilobits) that one byte per
//! bit is affordable, and it keeps indexing, slicing and audit dumps trivial.
//! Hot loops (Toeplitz hashing) pack into `u64` words locally.

use std::fmt;
use std::ops::{BitXor, Index};

use rand::Rng;

/// An ordered string of bits, each stored as `0` or `1`.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Bits(Vec<u8>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Bits(vec![0; len])
    }

    /// Builds from any sequence of integers, mapping nonzero values to `1`.
    pub fn from_bits<I, T>(iter: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<u64>,
    {
        Bits(iter.into_iter().map(|b| (b.into() != 0) as u8).collect())
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().map(u8::from).collect())
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect::<Option<Vec<u8>>>()
            .map(Bits)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        Bits((0..len).map(|_| rng.random::<bool>() as u8).collect())
    }

    /// Big-endian bits of `value`, `width` bits wide.
    pub fn from_u64(value: u64, width: usize) -> Self {
        assert!(width <= 64);
        Bits((0..width).rev().map(|i| ((value >> i) & 1) as u8).collect())
    }

    /// MSB-first expansion of a byte string.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Bits(
            bytes
                .iter()
                .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
                .collect(),
        )
    }

    /// MSB-first packing; the final byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i))))
            .collect()
    }

    /// Little-endian word packing: bit `i` lands in word `i / 64`, position `i % 64`.
    pub fn to_words(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.0.len().div_ceil(64)];
        for (i, &b) in self.0.iter().enumerate() {
            words[i / 64] |= (b as u64) << (i % 64);
        }
        words
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<u8> {
        self.0.get(i).copied()
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        self.0[i] = bit & 1;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn push(&mut self, bit: u8) {
        self.0.push(bit & 1);
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn slice(&self, start: usize, end: usize) -> Bits {
        Bits(self.0[start..end].to_vec())
    }

    pub fn split_at(&self, mid: usize) -> (Bits, Bits) {
        let (a, b) = self.0.split_at(mid);
        (Bits(a.to_vec()), Bits(b.to_vec()))
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn parity(&self) -> u8 {
        self.0.iter().fold(0, |acc, &b| acc ^ b)
    }

    /// Number of positions where `self` and `other` differ. Panics on length mismatch.
    pub fn hamming_distance(&self, other: &Bits) -> usize {
        assert_eq!(self.len(), other.len(), "hamming distance of unequal lengths");
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn xor(&self, other: &Bits) -> Bits {
        assert_eq!(self.len(), other.len(), "xor of unequal lengths");
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect())
    }
}

impl Index<usize> for Bits {
    type Output = u8;

    fn index(&self, i: usize) -> &u8 {
        &self.0[i]
    }
}

impl BitXor for &Bits {
    type Output = Bits;

    fn bitxor(self, rhs: &Bits) -> Bits {
        self.xor(rhs)
    }
}

impl FromIterator<u8> for Bits {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        Bits(iter.into_iter().map(|b| b & 1).collect())
    }
}

impl From<Vec<u8>> for Bits {
    fn from(v: Vec<u8>) -> Self {
        v.into_iter().collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() <= 64 {
            write!(f, "Bits({self})")
        } else {
            write!(f, "Bits(len={}, ones={})", self.len(), self.count_ones())
        }
    }
}
