use super::ledger::LeakageLedger;
use super::PostprocError;

/// Shannon entropy of a Bernoulli(e) source, in bits.
pub fn binary_entropy(e: f64) -> Result<f64, PostprocError> {
    if !(0.0..=1.0).contains(&e) {
        return Err(PostprocError::Domain(e));
    }
    if e == 0.0 || e == 1.0 {
        return Ok(0.0);
    }
    Ok(-e * e.log2() - (1.0 - e) * (1.0 - e).log2())
}

/// Asymptotic final-key length:
/// `max(0, floor(n_sifted * (1 - h(e_x))) - syndrome - verification - margin)`.
pub fn compute_final_length(
    n_sifted: usize,
    e_x: f64,
    ledger: &LeakageLedger,
    security_margin: u64,
) -> Result<usize, PostprocError> {
    let h = binary_entropy(e_x)?;
    let secret = (n_sifted as f64 * (1.0 - h)).floor().max(0.0) as u64;
    let out = secret.saturating_sub(ledger.syndrome_bits + ledger.verification_bits + security_margin);
    Ok(out as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_fixed_points() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_is_symmetric() {
        for e in [0.01, 0.11, 0.3] {
            let d = binary_entropy(e).unwrap() - binary_entropy(1.0 - e).unwrap();
            assert!(d.abs() < 1e-12);
        }
    }

    #[test]
    fn final_length_boundaries() {
        let ledger = LeakageLedger::new();
        assert_eq!(compute_final_length(1234, 0.0, &ledger, 0).unwrap(), 1234);
        let leaky = LeakageLedger {
            syndrome_bits: 10,
            verification_bits: 5,
            ..Default::default()
        };
        assert_eq!(compute_final_length(1234, 0.5, &ledger, 0).unwrap(), 0);
        assert_eq!(compute_final_length(1234, 0.5, &leaky, 0).unwrap(), 0);
        assert_eq!(compute_final_length(10, 0.0, &leaky, 100).unwrap(), 0);
    }
}
