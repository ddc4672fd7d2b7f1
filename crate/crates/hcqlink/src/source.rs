//! Quantum-dot single-photon source model.
//!
//! Emission is truncated at two photons per pulse: with a measured
//! g2(0) near 0.02 the three-photon terms are negligible. Each photon
//! carries a mode tag realizing the mean wave-packet overlap `M`: a photon
//! is tagged with the common mode with probability sqrt(M) and with a fresh
//! unique mode otherwise, so any two photons match (interfere fully) with
//! probability M.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamRng};

/// Emitter description.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Pulsed-excitation repetition rate, Hz.
    pub rep_rate_hz: f64,
    /// Probability of exactly one photon per pulse (includes collection
    /// efficiency up to the fiber input).
    pub p1: f64,
    /// Probability of exactly two photons per pulse. Mutually exclusive with
    /// `g2_target` in the run configuration.
    #[serde(default)]
    pub p2: f64,
    /// Mean pairwise wave-packet overlap of emitted photons, in [0, 1].
    #[serde(default = "one")]
    pub wavepacket_overlap: f64,
    /// Excitation pulse area in radians; pi for maximum inversion.
    #[serde(default = "pi")]
    pub pulse_area_rad: f64,
    /// Emission wavelength in micrometers.
    #[serde(default = "default_wavelength")]
    pub wavelength_um: f64,
}

fn one() -> f64 {
    1.0
}
fn pi() -> f64 {
    std::f64::consts::PI
}
fn default_wavelength() -> f64 {
    0.9339
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rep_rate_hz <= 0.0 {
            return Err(Error::InvalidParameter("rep_rate_hz must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.p1) || self.p2 < 0.0 || self.p1 + self.p2 > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "photon-number distribution invalid: p1={}, p2={}",
                self.p1, self.p2
            )));
        }
        if !(0.0..=1.0).contains(&self.wavepacket_overlap) {
            return Err(Error::InvalidParameter(
                "wavepacket_overlap must lie in [0, 1]".into(),
            ));
        }
        if self.pulse_area_rad < 0.0 {
            return Err(Error::InvalidParameter("pulse_area_rad must be >= 0".into()));
        }
        Ok(())
    }

    pub fn p0(&self) -> f64 {
        1.0 - self.p1 - self.p2
    }

    /// Pulse period in integer picoseconds.
    pub fn period_ps(&self) -> i64 {
        (1e12 / self.rep_rate_hz).round() as i64
    }
}

/// Mode label of one photon; photons interfere fully iff labels match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeTag {
    /// The common spectro-temporal mode shared by overlapping photons.
    Common,
    /// A fresh distinguishable mode, unique per photon.
    Unique(u64),
}

impl ModeTag {
    pub fn matches(self, other: ModeTag) -> bool {
        matches!((self, other), (ModeTag::Common, ModeTag::Common))
    }
}

/// One excitation pulse's worth of emission.
#[derive(Clone, Debug)]
pub struct EmissionEvent {
    pub pulse_index: u64,
    /// Mode tags of the emitted photons; the photon count is `tags.len()`.
    pub tags: Vec<ModeTag>,
}

impl EmissionEvent {
    pub fn photon_count(&self) -> usize {
        self.tags.len()
    }
}

/// Two-level Rabi excitation probability, `sin^2(area / 2)`.
pub fn rabi_excitation_probability(pulse_area_rad: f64) -> Result<f64> {
    if pulse_area_rad < 0.0 {
        return Err(Error::InvalidParameter("pulse area must be >= 0".into()));
    }
    Ok((pulse_area_rad / 2.0).sin().powi(2))
}

/// Mean photon number per pulse, `mu = p1 + 2 p2`.
pub fn effective_mu(spec: &SourceSpec) -> f64 {
    spec.p1 + 2.0 * spec.p2
}

/// Invert the ideal-detector HBT estimate `g2 = 2 p2 / mu^2` for `p2` at a
/// fixed `p1`. Closed form: the small root of
/// `4 g p2^2 + (4 g p1 - 2) p2 + g p1^2 = 0`.
///
/// ```
/// let p2 = hcqlink::source::target_g2_to_p2(0.0214, 0.253).unwrap();
/// let mu = 0.253 + 2.0 * p2;
/// assert!((2.0 * p2 / (mu * mu) - 0.0214).abs() < 1e-12);
/// ```
pub fn target_g2_to_p2(g2_target: f64, p1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&g2_target) {
        return Err(Error::InvalidParameter(format!(
            "g2_target must lie in [0, 1), got {g2_target}"
        )));
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(Error::InvalidParameter(format!(
            "p1 must lie in [0, 1], got {p1}"
        )));
    }
    if g2_target == 0.0 {
        return Ok(0.0);
    }
    let a = 4.0 * g2_target;
    let b = 4.0 * g2_target * p1 - 2.0;
    let c = g2_target * p1 * p1;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NoSolution(format!(
            "no real p2 for g2={g2_target} at p1={p1}"
        )));
    }
    let p2 = (-b - disc.sqrt()) / (2.0 * a);
    if p2 < 0.0 || p1 + p2 > 1.0 {
        return Err(Error::NoSolution(format!(
            "implied p2={p2} leaves the photon-number distribution invalid"
        )));
    }
    Ok(p2)
}

/// Generate emission events for pulse indices `[start, start + count)`.
///
/// Deterministic in `(spec, range, seed)`; disjoint ranges generated
/// separately concatenate to exactly the serial output.
pub fn emit_stream(spec: &SourceSpec, start: u64, count: u64, seed: u64) -> Vec<EmissionEvent> {
    let rng = StreamRng::new(seed, Stream::Emission);
    let common_prob = spec.wavepacket_overlap.sqrt();
    (start..start + count)
        .map(|pulse_index| {
            let mut r = rng.at(pulse_index);
            let u = r.uniform();
            let n = if u < spec.p1 {
                1
            } else if u < spec.p1 + spec.p2 {
                2
            } else {
                0
            };
            let tags = (0..n)
                .map(|k| {
                    if r.bernoulli(common_prob) {
                        ModeTag::Common
                    } else {
                        ModeTag::Unique(pulse_index * 2 + k)
                    }
                })
                .collect();
            EmissionEvent { pulse_index, tags }
        })
        .collect()
}
