//! BB84 state preparation, passive-basis measurement, gating, sifting and
//! QBER estimation.
//!
//! Polarization errors are modeled as a single receiver misalignment angle
//! (Malus law, matched-basis error probability `sin^2(angle)`); time-bin
//! errors as an interferometer phase error with matched-basis error
//! probability `sin^2(phase / 2)`. Both angles are calibration parameters
//! inverted from measured QBER figures rather than hardware specs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::DetectorSpec;
use crate::rng::EventRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    Polarization,
    TimeBin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// Prepared qubit state. In polarization the Z states are {H, V} and the
/// X states {+, -}; in time-bin the Z states are {early, late} and the X
/// states the balanced superpositions of the two bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QubitState {
    pub encoding: Encoding,
    pub basis: Basis,
    pub bit: u8,
}

impl QubitState {
    /// Conventional state label: H, V, +, - / early, late, early+late, early-late.
    pub fn label(&self) -> &'static str {
        match (self.encoding, self.basis, self.bit) {
            (Encoding::Polarization, Basis::Z, 0) => "H",
            (Encoding::Polarization, Basis::Z, _) => "V",
            (Encoding::Polarization, Basis::X, 0) => "+",
            (Encoding::Polarization, Basis::X, _) => "-",
            (Encoding::TimeBin, Basis::Z, 0) => "early",
            (Encoding::TimeBin, Basis::Z, _) => "late",
            (Encoding::TimeBin, Basis::X, 0) => "early+late",
            (Encoding::TimeBin, Basis::X, _) => "early-late",
        }
    }
}

/// Deterministic BB84 state preparation (Z: 0 -> H/early, 1 -> V/late;
/// X: 0 -> +, 1 -> -).
pub fn prepare(bit: u8, basis: Basis, encoding: Encoding) -> QubitState {
    QubitState {
        encoding,
        basis,
        bit: if bit == 0 { 0 } else { 1 },
    }
}

/// Passive-basis receiver description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSpec {
    /// Probability that the passive beam splitter sends a photon to the Z
    /// analyzer.
    #[serde(default = "half")]
    pub basis_split: f64,
    /// Polarization misalignment angle in radians.
    #[serde(default)]
    pub misalignment_rad: f64,
    /// Time-bin interferometer phase error in radians.
    #[serde(default)]
    pub phase_error_rad: f64,
    /// Detection gate width in nanoseconds.
    #[serde(default = "default_gate")]
    pub gate_width_ns: f64,
    /// The four detectors (H, V, +, -). A single entry is replicated.
    pub detectors: Vec<DetectorSpec>,
}

fn half() -> f64 {
    0.5
}
fn default_gate() -> f64 {
    4.0
}

impl ReceiverSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.basis_split) {
            return Err(Error::InvalidParameter(
                "basis_split must lie in [0, 1]".into(),
            ));
        }
        if self.gate_width_ns < 0.0 {
            return Err(Error::InvalidParameter("gate_width_ns must be >= 0".into()));
        }
        if self.detectors.len() != 1 && self.detectors.len() != 4 {
            return Err(Error::InvalidParameter(format!(
                "expected 1 or 4 detector specs, got {}",
                self.detectors.len()
            )));
        }
        for d in &self.detectors {
            d.validate()?;
        }
        Ok(())
    }

    pub fn detector(&self, channel: usize) -> &DetectorSpec {
        if self.detectors.len() == 1 {
            &self.detectors[0]
        } else {
            &self.detectors[channel]
        }
    }

    /// Matched-basis bit-error probability for an encoding.
    pub fn matched_error_probability(&self, encoding: Encoding) -> f64 {
        match encoding {
            Encoding::Polarization => self.misalignment_rad.sin().powi(2),
            Encoding::TimeBin => (self.phase_error_rad / 2.0).sin().powi(2),
        }
    }
}

/// Misalignment angle whose Malus-law error probability equals a target
/// matched-basis error rate (the QBER calibration oracle).
///
/// ```
/// let theta = hcqlink::bb84::misalignment_for_error(0.0011).unwrap();
/// assert!((theta.sin().powi(2) - 0.0011).abs() < 1e-15);
/// assert!((theta.to_degrees() - 1.9).abs() < 0.01);
/// ```
pub fn misalignment_for_error(error_probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&error_probability) {
        return Err(Error::InvalidParameter(
            "error probability must lie in [0, 1]".into(),
        ));
    }
    Ok(error_probability.sqrt().asin())
}

/// Phase error whose matched-basis error probability `sin^2(phase/2)`
/// equals a target rate.
pub fn phase_error_for_error(error_probability: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&error_probability) {
        return Err(Error::InvalidParameter(
            "error probability must lie in [0, 1]".into(),
        ));
    }
    Ok(2.0 * error_probability.sqrt().asin())
}

/// Detector channel index: (basis, bit) -> {H: 0, V: 1, +: 2, -: 3}.
pub fn detector_channel(basis: Basis, bit: u8) -> u8 {
    match (basis, bit) {
        (Basis::Z, 0) => 0,
        (Basis::Z, _) => 1,
        (Basis::X, 0) => 2,
        (Basis::X, _) => 3,
    }
}

/// Project one photon in `state` onto the passively chosen analyzer basis.
/// Returns the detector channel the photon exits toward (detection
/// efficiency is applied separately). Matched basis flips the bit with the
/// Malus-law error probability; mismatched basis yields a uniform bit.
pub fn measure(state: &QubitState, rx: &ReceiverSpec, rng: &mut EventRng) -> u8 {
    let measured_basis = if rng.bernoulli(rx.basis_split) {
        Basis::Z
    } else {
        Basis::X
    };
    let bit = if measured_basis == state.basis {
        let err = rx.matched_error_probability(state.encoding);
        if rng.bernoulli(err) {
            1 - state.bit
        } else {
            state.bit
        }
    } else if rng.bernoulli(0.5) {
        1
    } else {
        0
    };
    detector_channel(measured_basis, bit)
}

/// Keep clicks whose phase within the repetition period lies inside the
/// gate window centered at `offset_ps`.
pub fn gate(
    tags: &crate::link::TimeTagStream,
    gate_width_ns: f64,
    rep_period_ps: i64,
    offset_ps: i64,
) -> Result<crate::link::TimeTagStream> {
    let gate_ps = (gate_width_ns * 1000.0).round() as i64;
    if gate_ps > rep_period_ps {
        return Err(Error::InvalidParameter(format!(
            "gate width {gate_ps} ps exceeds repetition period {rep_period_ps} ps"
        )));
    }
    if gate_ps == rep_period_ps {
        return Ok(tags.clone());
    }
    let half = gate_ps / 2;
    let records = tags
        .records
        .iter()
        .copied()
        .filter(|&(_, t)| {
            let mut phase = (t - offset_ps).rem_euclid(rep_period_ps);
            if phase > rep_period_ps / 2 {
                phase -= rep_period_ps;
            }
            phase.abs() <= half
        })
        .collect();
    Ok(crate::link::TimeTagStream {
        records,
        duration_ps: tags.duration_ps,
    })
}

/// Alice's per-round choice.
#[derive(Clone, Copy, Debug)]
pub struct AliceChoice {
    pub bit: u8,
    pub basis: Basis,
}

/// Bob's per-round gated detection outcome: which detector channels
/// clicked (deduplicated).
#[derive(Clone, Debug, Default)]
pub struct RoundClicks {
    pub channels: Vec<u8>,
}

/// One sifted key bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiftedRecord {
    pub round_index: u64,
    pub alice_bit: u8,
    pub bob_bit: u8,
    pub basis: Basis,
}

/// Standard BB84 sifting: keep rounds with exactly one gated click whose
/// analyzer basis matches Alice's; discard multi-click rounds outright.
pub fn sift(alice: &[AliceChoice], bob: &[RoundClicks]) -> Result<Vec<SiftedRecord>> {
    if alice.len() != bob.len() {
        return Err(Error::LengthMismatch(alice.len(), bob.len()));
    }
    let mut out = Vec::new();
    for (i, (a, b)) in alice.iter().zip(bob).enumerate() {
        if b.channels.len() != 1 {
            continue;
        }
        let ch = b.channels[0];
        let (basis, bit) = match ch {
            0 => (Basis::Z, 0),
            1 => (Basis::Z, 1),
            2 => (Basis::X, 0),
            _ => (Basis::X, 1),
        };
        if basis == a.basis {
            out.push(SiftedRecord {
                round_index: i as u64,
                alice_bit: a.bit,
                bob_bit: bit,
                basis,
            });
        }
    }
    Ok(out)
}

/// QBER with binomial standard error.
pub fn qber(records: &[SiftedRecord]) -> Result<(f64, f64)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no sifted records".into()));
    }
    let n = records.len() as f64;
    let errors = records
        .iter()
        .filter(|r| r.alice_bit != r.bob_bit)
        .count() as f64;
    let e = errors / n;
    Ok((e, (e * (1.0 - e) / n).sqrt()))
}

/// Result of decoding one time-bin round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeBinOutcome {
    Bit(u8),
    /// X-basis decoding lands in a non-interfering time slot.
    Inconclusive,
}

/// Encode a time-bin state and decode it through the modeled
/// polarization-assisted unbalanced interferometer. Z reads the arrival
/// bin; X succeeds only in the interfering slot (probability 1/2). The
/// auxiliary-polarization decoding optics flip the bit with probability
/// `sin^2(phase_error / 2)` in either basis, which is what the calibrated
/// average QBER over the four states measures.
pub fn timebin_roundtrip(
    bit: u8,
    basis: Basis,
    rx: &ReceiverSpec,
    rng: &mut EventRng,
) -> TimeBinOutcome {
    let state = prepare(bit, basis, Encoding::TimeBin);
    if basis == Basis::X && !rng.bernoulli(0.5) {
        return TimeBinOutcome::Inconclusive;
    }
    let err = rx.matched_error_probability(Encoding::TimeBin);
    let decoded = if rng.bernoulli(err) {
        1 - state.bit
    } else {
        state.bit
    };
    TimeBinOutcome::Bit(decoded)
}
