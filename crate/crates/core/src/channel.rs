//! Pulse preparation, the lossy quantum channel, intercept-resend
//! eavesdropping and measurement, at the level of the four BB84 states.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("eavesdropper fraction must be 0 when no eavesdropper is configured")]
    FractionWithoutEve,
}

fn check_probability(name: &'static str, value: f64) -> Result<f64, ChannelError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ChannelError::OutOfRange { name, value })
    }
}

/// Preparation/measurement basis. `Z` is the computational basis, `X` the
/// diagonal one; they are mutually unbiased.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub fn from_bit(bit: u8) -> Basis {
        if bit & 1 == 0 {
            Basis::Z
        } else {
            Basis::X
        }
    }

    pub fn as_bit(self) -> u8 {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Basis {
        Basis::from_bit(rng.random::<bool>() as u8)
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "Z",
            Basis::X => "X",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntensityClass {
    Signal,
    Decoy,
}

impl IntensityClass {
    pub fn as_bit(self) -> u8 {
        match self {
            IntensityClass::Signal => 0,
            IntensityClass::Decoy => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Self {
        if bit & 1 == 0 {
            IntensityClass::Signal
        } else {
            IntensityClass::Decoy
        }
    }
}

impl fmt::Display for IntensityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntensityClass::Signal => "S",
            IntensityClass::Decoy => "D",
        })
    }
}

/// One of the four BB84 states `|0>_z, |1>_z, |0>_x, |1>_x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qubit {
    pub prepared_bit: u8,
    pub prepared_basis: Basis,
}

impl Qubit {
    pub fn new(bit: u8, basis: Basis) -> Self {
        Qubit {
            prepared_bit: bit & 1,
            prepared_basis: basis,
        }
    }

    /// State vector in the Z basis, `(<0_z|psi>, <1_z|psi>)`.
    ///
    /// `|0>_x = (|0>_z + |1>_z)/sqrt2` and `|1>_x = (|0>_z - |1>_z)/sqrt2`.
    pub fn amplitudes(&self) -> [f64; 2] {
        match (self.prepared_basis, self.prepared_bit) {
            (Basis::Z, 0) => [1.0, 0.0],
            (Basis::Z, _) => [0.0, 1.0],
            (Basis::X, 0) => [FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            (Basis::X, _) => [FRAC_1_SQRT_2, -FRAC_1_SQRT_2],
        }
    }

    /// Born-rule probability of reading `outcome` when measuring in `basis`.
    pub fn outcome_probability(&self, basis: Basis, outcome: u8) -> f64 {
        let projector = Qubit::new(outcome, basis).amplitudes();
        let psi = self.amplitudes();
        let overlap = projector[0] * psi[0] + projector[1] * psi[1];
        overlap * overlap
    }
}

/// A qubit tagged with its intensity class, as it leaves Alice's source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub qubit: Qubit,
    pub intensity: IntensityClass,
}

pub fn prepare_pulse(bit: u8, basis: Basis, intensity: IntensityClass) -> Pulse {
    Pulse {
        qubit: Qubit::new(bit, basis),
        intensity,
    }
}

/// Projective measurement. A matched basis returns the prepared bit; a
/// mismatched basis returns a fair coin drawn from the measuring party's `rng`.
pub fn measure<R: Rng + ?Sized>(q: &Qubit, basis: Basis, rng: &mut R) -> u8 {
    if basis == q.prepared_basis {
        q.prepared_bit
    } else {
        rng.random::<bool>() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    transmittance: f64,
    misalignment_error: f64,
    decoy_detect_scale: f64,
}

impl ChannelParams {
    pub fn new(
        transmittance: f64,
        misalignment_error: f64,
        decoy_detect_scale: f64,
    ) -> Result<Self, ChannelError> {
        Ok(ChannelParams {
            transmittance: check_probability("transmittance", transmittance)?,
            misalignment_error: check_probability("misalignment_error", misalignment_error)?,
            decoy_detect_scale: check_probability("decoy_detect_scale", decoy_detect_scale)?,
        })
    }

    /// Lossless, noiseless channel.
    pub fn ideal() -> Self {
        ChannelParams {
            transmittance: 1.0,
            misalignment_error: 0.0,
            decoy_detect_scale: 1.0,
        }
    }

    pub fn transmittance(&self) -> f64 {
        self.transmittance
    }

    pub fn misalignment_error(&self) -> f64 {
        self.misalignment_error
    }

    pub fn decoy_detect_scale(&self) -> f64 {
        self.decoy_detect_scale
    }

    pub fn detection_probability(&self, intensity: IntensityClass) -> f64 {
        match intensity {
            IntensityClass::Signal => self.transmittance,
            IntensityClass::Decoy => self.transmittance * self.decoy_detect_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EveKind {
    None,
    InterceptResend,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveModel {
    kind: EveKind,
    fraction: f64,
}

impl EveModel {
    pub fn none() -> Self {
        EveModel {
            kind: EveKind::None,
            fraction: 0.0,
        }
    }

    pub fn intercept_resend(fraction: f64) -> Result<Self, ChannelError> {
        Ok(EveModel {
            kind: EveKind::InterceptResend,
            fraction: check_probability("eve fraction", fraction)?,
        })
    }

    pub fn new(kind: EveKind, fraction: f64) -> Result<Self, ChannelError> {
        match kind {
            EveKind::None if fraction != 0.0 => Err(ChannelError::FractionWithoutEve),
            EveKind::None => Ok(Self::none()),
            EveKind::InterceptResend => Self::intercept_resend(fraction),
        }
    }

    pub fn kind(&self) -> EveKind {
        self.kind
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// A registered pulse as it arrives at Bob's detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionEvent {
    pub received: Qubit,
    pub intercepted: bool,
}

/// Sends one pulse through the channel.
///
/// Draw order is fixed so transcripts are reproducible: the channel stream
/// decides attack, then detection, then misalignment; Eve's own stream picks
/// her basis and resolves her measurement.
pub fn transmit<R: Rng + ?Sized>(
    pulse: &Pulse,
    ch: &ChannelParams,
    eve: &EveModel,
    channel_rng: &mut R,
    eve_rng: &mut R,
) -> Option<DetectionEvent> {
    let attacked = eve.kind == EveKind::InterceptResend && channel_rng.random_bool(eve.fraction);
    let detected = channel_rng.random_bool(ch.detection_probability(pulse.intensity));
    let flip = channel_rng.random_bool(ch.misalignment_error) as u8;

    let mut state = pulse.qubit;
    if attacked {
        let eve_basis = Basis::random(eve_rng);
        let outcome = measure(&state, eve_basis, eve_rng);
        state = Qubit::new(outcome, eve_basis);
    }
    if !detected {
        return None;
    }
    Some(DetectionEvent {
        received: Qubit::new(state.prepared_bit ^ flip, state.prepared_basis),
        intercepted: attacked,
    })
}
