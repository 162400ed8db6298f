//! Information reconciliation: Alice's sifted key is the reference and Bob
//! corrects toward it from per-block LDPC syndromes, falling back to the
//! interactive bisection exchange when belief propagation does not converge.

use serde::{Deserialize, Serialize};

use super::cascade::{cascade, CascadeTranscript};
use super::key::KeyMaterial;
use super::ldpc::{select_code, LdpcCode};
use super::ledger::{Disclosure, LeakageLedger};
use super::PostprocError;
use crate::bits::Bits;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    /// Error-rate estimate used to pick the code.
    pub qber_estimate: f64,
    /// Added to the estimate before code selection.
    pub qber_margin: f64,
    pub max_iterations: usize,
    pub fallback: bool,
}

impl CodeParams {
    pub fn for_qber(qber_estimate: f64) -> Self {
        CodeParams {
            qber_estimate,
            ..Default::default()
        }
    }

    pub fn code(&self) -> &'static LdpcCode {
        select_code(self.qber_estimate + self.qber_margin)
    }
}

impl Default for CodeParams {
    fn default() -> Self {
        CodeParams {
            qber_estimate: 0.0,
            qber_margin: 0.01,
            max_iterations: 100,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub len: usize,
    /// Syndrome of the reference block, sent in the clear.
    pub syndrome: Bits,
    /// Belief-propagation iterations, `None` if it did not converge.
    pub iterations: Option<usize>,
    pub fallback: Option<CascadeTranscript>,
}

#[derive(Debug, Clone)]
pub struct Reconciliation {
    pub corrected: KeyMaterial,
    pub syndrome_leak: u64,
    pub code_name: &'static str,
    pub blocks: Vec<BlockRecord>,
}

impl Reconciliation {
    /// All syndromes concatenated, as transmitted by the reference side.
    pub fn syndrome_message(&self) -> Bits {
        let mut out = Bits::new();
        for b in &self.blocks {
            out.extend_from(&b.syndrome);
        }
        out
    }

    /// Fallback parities, `(reference side, correcting side)`.
    pub fn fallback_messages(&self) -> (Bits, Bits) {
        let (mut a, mut b) = (Bits::new(), Bits::new());
        for t in self.blocks.iter().filter_map(|b| b.fallback.as_ref()) {
            a.extend_from(&t.reference_parities);
            b.extend_from(&t.noisy_parities);
        }
        (a, b)
    }

    pub fn used_fallback(&self) -> bool {
        self.blocks.iter().any(|b| b.fallback.is_some())
    }
}

fn padded(bits: &Bits, start: usize, len: usize, n: usize) -> Bits {
    let mut w = bits.slice(start, start + len);
    w.extend_from(&Bits::zeros(n - len));
    w
}

/// Reconciles `noisy` against `reference`, booking every syndrome and
/// fallback parity in `ledger`.
pub fn correct_errors(
    reference: &KeyMaterial,
    noisy: &KeyMaterial,
    params: &CodeParams,
    ledger: &mut LeakageLedger,
) -> Result<Reconciliation, PostprocError> {
    if reference.len() != noisy.len() {
        return Err(PostprocError::LengthMismatch {
            left: reference.len(),
            right: noisy.len(),
        });
    }
    let code = params.code();
    let n = code.n();
    let llr_qber = code.design_qber().max(params.qber_estimate);
    let (x, y) = (reference.bits(), noisy.bits());

    let mut corrected = Bits::new();
    let mut blocks = Vec::new();
    let mut leak = 0u64;
    let mut start = 0;
    while start < x.len() {
        let len = n.min(x.len() - start);
        let xa = padded(x, start, len, n);
        let yb = padded(y, start, len, n);
        let syndrome = code.syndrome(&xa);
        leak += syndrome.len() as u64;
        ledger.record(Disclosure::Syndrome, syndrome.len() as u64);

        let mut record = BlockRecord {
            len,
            syndrome,
            iterations: None,
            fallback: None,
        };
        let block = match code.decode(&yb, &record.syndrome, llr_qber, len, params.max_iterations) {
            Some((word, iters)) => {
                record.iterations = Some(iters);
                word.slice(0, len)
            }
            None if params.fallback => {
                let (fixed, transcript) = cascade(&xa.slice(0, len), &yb.slice(0, len), llr_qber);
                leak += transcript.disclosed_bits();
                ledger.record(Disclosure::Syndrome, transcript.disclosed_bits());
                record.fallback = Some(transcript);
                if code.syndrome(&padded(&fixed, 0, len, n)) != record.syndrome {
                    return Err(PostprocError::DecodeFailure { block: blocks.len() });
                }
                fixed
            }
            None => return Err(PostprocError::DecodeFailure { block: blocks.len() }),
        };
        corrected.extend_from(&block);
        blocks.push(record);
        start += len;
    }

    Ok(Reconciliation {
        corrected: KeyMaterial::new(corrected, noisy.stage()),
        syndrome_leak: leak,
        code_name: code.name(),
        blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::postproc::key::Stage;
    use crate::rng::derive_rng;
    use rand::Rng;

    fn sifted(bits: Bits) -> KeyMaterial {
        KeyMaterial::new(bits, Stage::Sifted)
    }

    #[test]
    fn zero_errors_need_no_iterations() {
        let x = Bits::random(&mut derive_rng(1, "rec"), 5000);
        let mut ledger = LeakageLedger::new();
        let r = correct_errors(&sifted(x.clone()), &sifted(x.clone()), &CodeParams::default(), &mut ledger).unwrap();
        assert_eq!(r.corrected.bits(), &x);
        assert!(r.blocks.iter().all(|b| b.iterations == Some(0)));
        assert_eq!(ledger.syndrome_bits, r.syndrome_leak);
        assert_eq!(r.syndrome_message().len() as u64, r.syndrome_leak);
    }

    #[test]
    fn single_flip_at_design_rate() {
        let mut rng = derive_rng(2, "rec");
        let x = Bits::random(&mut rng, 1024);
        let mut y = x.clone();
        y.flip(rng.random_range(0..1024));
        let mut ledger = LeakageLedger::new();
        let r = correct_errors(&sifted(x.clone()), &sifted(y), &CodeParams::for_qber(0.05), &mut ledger).unwrap();
        assert_eq!(r.corrected.bits(), &x);
        assert_eq!(r.blocks.len(), 1);
    }

    #[test]
    fn length_mismatch() {
        let mut ledger = LeakageLedger::new();
        let e = correct_errors(&sifted(Bits::zeros(3)), &sifted(Bits::zeros(4)), &CodeParams::default(), &mut ledger);
        assert!(matches!(e, Err(PostprocError::LengthMismatch { .. })));
    }

    #[test]
    fn fallback_recovers_from_underestimated_qber() {
        let mut rng = derive_rng(3, "rec");
        let x = Bits::random(&mut rng, 4096);
        let mut y = x.clone();
        for i in 0..4096 {
            if rng.random_bool(0.04) {
                y.flip(i);
            }
        }
        let params = CodeParams {
            qber_margin: 0.0,
            ..CodeParams::for_qber(0.0)
        };
        let mut ledger = LeakageLedger::new();
        let r = correct_errors(&sifted(x.clone()), &sifted(y), &params, &mut ledger).unwrap();
        assert!(r.used_fallback());
        assert_eq!(r.corrected.bits(), &x);
        let (a, b) = r.fallback_messages();
        assert_eq!(r.syndrome_leak, (r.syndrome_message().len() + a.len() + b.len()) as u64);
    }

    #[test]
    fn no_fallback_reports_decode_failure() {
        let mut rng = derive_rng(4, "rec");
        let x = Bits::random(&mut rng, 4096);
        let mut y = x.clone();
        for i in 0..4096 {
            if rng.random_bool(0.15) {
                y.flip(i);
            }
        }
        let params = CodeParams {
            qber_margin: 0.0,
            fallback: false,
            ..CodeParams::for_qber(0.0)
        };
        let mut ledger = LeakageLedger::new();
        let e = correct_errors(&sifted(x), &sifted(y), &params, &mut ledger);
        assert!(matches!(e, Err(PostprocError::DecodeFailure { block: 0 })));
    }
}
