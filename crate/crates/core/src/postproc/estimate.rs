use serde::{Deserialize, Serialize};

use super::PostprocError;

/// Default abort threshold on the X-basis error rate.
pub const DEFAULT_THRESHOLD: f64 = 0.11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AbortReason {
    ErrorRateAboveThreshold,
    EmptySample,
    DecodeFailure,
    VerificationFailed,
}

impl AbortReason {
    pub fn code(self) -> &'static str {
        match self {
            AbortReason::ErrorRateAboveThreshold => "qber-above-threshold",
            AbortReason::EmptySample => "empty-x-sample",
            AbortReason::DecodeFailure => "decode-failure",
            AbortReason::VerificationFailed => "verification-failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Proceed,
    Abort(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Mismatch fraction over the sample; `None` when the sample is empty.
    pub e_x: Option<f64>,
    pub sample_size: usize,
    pub decision: Decision,
}

/// Estimates the eavesdropping level from disclosed matched-X bit pairs.
/// Proceeds iff `e_x <= threshold`.
pub fn estimate_eavesdropping(
    x_sample: &[(u8, u8)],
    threshold: f64,
) -> Result<EstimationResult, PostprocError> {
    if !(threshold > 0.0 && threshold < 0.5) {
        return Err(PostprocError::InvalidThreshold(threshold));
    }
    if x_sample.is_empty() {
        return Ok(EstimationResult {
            e_x: None,
            sample_size: 0,
            decision: Decision::Abort(AbortReason::EmptySample),
        });
    }
    let errors = x_sample.iter().filter(|(a, b)| a != b).count();
    let e_x = errors as f64 / x_sample.len() as f64;
    let decision = if e_x > threshold {
        Decision::Abort(AbortReason::ErrorRateAboveThreshold)
    } else {
        Decision::Proceed
    };
    Ok(EstimationResult {
        e_x: Some(e_x),
        sample_size: x_sample.len(),
        decision,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agreeing_sample_proceeds() {
        let r = estimate_eavesdropping(&[(0, 0), (1, 1), (1, 1)], 0.11).unwrap();
        assert_eq!(r.e_x, Some(0.0));
        assert_eq!(r.decision, Decision::Proceed);
    }

    #[test]
    fn quarter_errors_abort() {
        let sample: Vec<_> = (0..100).map(|i| (0u8, u8::from(i < 25))).collect();
        let r = estimate_eavesdropping(&sample, 0.11).unwrap();
        assert_eq!(r.e_x, Some(0.25));
        assert_eq!(r.decision, Decision::Abort(AbortReason::ErrorRateAboveThreshold));
    }

    #[test]
    fn empty_sample_has_its_own_reason() {
        let r = estimate_eavesdropping(&[], 0.11).unwrap();
        assert_eq!(r.e_x, None);
        assert_eq!(r.decision, Decision::Abort(AbortReason::EmptySample));
    }

    #[test]
    fn threshold_must_be_in_open_interval() {
        for t in [0.0, 0.5, -1.0, f64::NAN] {
            assert!(estimate_eavesdropping(&[(0, 0)], t).is_err());
        }
    }

    #[test]
    fn boundary_is_inclusive() {
        let sample: Vec<_> = (0..100).map(|i| (0u8, u8::from(i < 10))).collect();
        let r = estimate_eavesdropping(&sample, 0.1).unwrap();
        assert_eq!(r.decision, Decision::Proceed);
    }
}
