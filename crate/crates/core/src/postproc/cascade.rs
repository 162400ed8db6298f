//! Interactive parity-bisection fallback (Cascade with back-tracking).
//!
//! Both parties' blocks are available to the simulator, so the exchange is
//! evaluated locally; every parity either side would announce is counted.

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use crate::bits::Bits;
use crate::rng::derive_rng;

pub const PASSES: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CascadeTranscript {
    /// Parities announced by the reference side.
    pub reference_parities: Bits,
    /// Parities announced by the correcting side.
    pub noisy_parities: Bits,
}

impl CascadeTranscript {
    pub fn disclosed_bits(&self) -> u64 {
        (self.reference_parities.len() + self.noisy_parities.len()) as u64
    }
}

struct Pass {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
    reference_parity: Vec<u8>,
    noisy_parity: Vec<u8>,
}

fn parity(bits: &Bits, positions: &[usize]) -> u8 {
    positions.iter().fold(0, |acc, &p| acc ^ bits[p])
}

/// Corrects `noisy` toward `reference`. Block sizes start at `0.73 / qber`
/// and double each pass; pass permutations come from a fixed public stream.
pub fn cascade(reference: &Bits, noisy: &Bits, qber: f64) -> (Bits, CascadeTranscript) {
    assert_eq!(reference.len(), noisy.len());
    let n = reference.len();
    let mut fixed = noisy.clone();
    let mut transcript = CascadeTranscript::default();
    if n == 0 {
        return (fixed, transcript);
    }
    let announce = |t: &mut CascadeTranscript, a: u8, b: u8| {
        t.reference_parities.push(a);
        t.noisy_parities.push(b);
    };

    let first = ((0.73 / qber.max(0.01)).ceil() as usize).clamp(4, n);
    let mut passes: Vec<Pass> = Vec::with_capacity(PASSES);
    for p in 0..PASSES {
        let size = (first << p).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        if p > 0 {
            order.shuffle(&mut derive_rng(p as u64, "cascade/permutation"));
        }
        let blocks: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
        let mut block_of = vec![0; n];
        for (b, block) in blocks.iter().enumerate() {
            for &i in block {
                block_of[i] = b;
            }
        }
        let reference_parity: Vec<u8> = blocks.iter().map(|b| parity(reference, b)).collect();
        let noisy_parity: Vec<u8> = blocks.iter().map(|b| parity(&fixed, b)).collect();
        for (&a, &b) in reference_parity.iter().zip(&noisy_parity) {
            announce(&mut transcript, a, b);
        }
        passes.push(Pass {
            blocks,
            block_of,
            reference_parity,
            noisy_parity,
        });

        let mut queue: VecDeque<(usize, usize)> = (0..passes[p].blocks.len())
            .filter(|&b| passes[p].reference_parity[b] != passes[p].noisy_parity[b])
            .map(|b| (p, b))
            .collect();
        while let Some((q, b)) = queue.pop_front() {
            if passes[q].reference_parity[b] == passes[q].noisy_parity[b] {
                continue;
            }
            let mut span: &[usize] = &passes[q].blocks[b];
            while span.len() > 1 {
                let (left, right) = span.split_at(span.len() / 2);
                let (a, c) = (parity(reference, left), parity(&fixed, left));
                announce(&mut transcript, a, c);
                span = if a != c { left } else { right };
            }
            let pos = span[0];
            fixed.flip(pos);
            for (k, pass) in passes.iter_mut().enumerate() {
                let blk = pass.block_of[pos];
                pass.noisy_parity[blk] ^= 1;
                if pass.noisy_parity[blk] != pass.reference_parity[blk] {
                    queue.push_back((k, blk));
                }
            }
        }
    }
    (fixed, transcript)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fixes_sparse_errors() {
        let mut rng = derive_rng(1, "cascade-test");
        let mut ok = 0;
        for _ in 0..20 {
            let a = Bits::random(&mut rng, 2000);
            let mut b = a.clone();
            for i in 0..2000 {
                if rng.random_bool(0.03) {
                    b.flip(i);
                }
            }
            let (fixed, t) = cascade(&a, &b, 0.03);
            assert!(t.disclosed_bits() > 0);
            ok += usize::from(fixed == a);
        }
        assert!(ok >= 19, "{ok}");
    }

    #[test]
    fn identical_inputs_only_cost_block_parities() {
        let a = Bits::random(&mut derive_rng(2, "cascade-test"), 500);
        let (fixed, t) = cascade(&a, &a, 0.05);
        assert_eq!(fixed, a);
        assert_eq!(t.reference_parities, t.noisy_parities);
    }
}
