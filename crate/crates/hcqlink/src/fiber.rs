//! Anti-resonant hollow-core fiber model.
//!
//! The guiding membranes of thickness `t` and index `n` are resonant at
//! wavelengths `lambda_m = (2 t / m) sqrt(n^2 - 1)`; between successive
//! resonances lies a low-loss anti-resonant window. The model keeps a flat
//! attenuation figure per window plus a per-interface insertion loss keyed
//! by band, which is enough to reproduce measured link budgets without any
//! electromagnetic mode solving.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard band around each resonance; wavelengths closer than this are
/// rejected as on-resonance rather than assigned to a window.
pub const RESONANCE_GUARD_UM: f64 = 0.001;

/// Wavelength band used to key interface losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    /// Single-photon channel near 934 nm.
    Quantum,
    /// Telecom channel near 1550 nm.
    Classical,
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Band::Quantum => write!(f, "quantum"),
            Band::Classical => write!(f, "classical"),
        }
    }
}

/// Physical description of the fiber channel.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSpec {
    /// Membrane thickness in micrometers.
    pub membrane_thickness_um: f64,
    /// Membrane refractive index (fused silica ~ 1.45 at these wavelengths).
    #[serde(default = "default_index")]
    pub refractive_index: f64,
    /// Flat attenuation per anti-resonant window, dB/km, keyed by window index.
    pub window_loss_db_per_km: BTreeMap<u32, f64>,
    /// Best measured attenuation per window, dB/km; metadata only, not used
    /// in budgets (e.g. the 3rd-window minimum vs the value at the channel
    /// wavelength).
    #[serde(default)]
    pub window_min_loss_db_per_km: BTreeMap<u32, f64>,
    /// Per-interface insertion loss in dB, keyed by band.
    pub interface_loss_db: BTreeMap<Band, f64>,
    /// Fiber length in kilometers.
    pub length_km: f64,
    /// Number of solid-core/hollow-core interfaces in the link.
    pub num_interfaces: u32,
}

fn default_index() -> f64 {
    1.45
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if self.membrane_thickness_um <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "membrane_thickness_um must be > 0, got {}",
                self.membrane_thickness_um
            )));
        }
        if self.refractive_index <= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "refractive_index must be > 1, got {}",
                self.refractive_index
            )));
        }
        if self.length_km < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "length_km must be >= 0, got {}",
                self.length_km
            )));
        }
        for (&m, &loss) in &self.window_loss_db_per_km {
            if m == 0 {
                return Err(Error::InvalidParameter(
                    "window_loss keys must be positive integers".into(),
                ));
            }
            if loss < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "window {m} attenuation must be >= 0, got {loss}"
                )));
            }
        }
        for (band, &loss) in &self.interface_loss_db {
            if loss < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "interface loss for band {band} must be >= 0, got {loss}"
                )));
            }
        }
        Ok(())
    }

    /// Copy with the quantum-band propagation and interface losses replaced,
    /// for what-if budgets with improved fabrication.
    pub fn improvement_scenario(
        &self,
        new_prop_loss_db_per_km: f64,
        new_interface_loss_db: f64,
        quantum_window: u32,
    ) -> Result<FiberSpec> {
        if new_prop_loss_db_per_km < 0.0 || new_interface_loss_db < 0.0 {
            return Err(Error::InvalidParameter(
                "improvement losses must be >= 0".into(),
            ));
        }
        let mut out = self.clone();
        out.window_loss_db_per_km
            .insert(quantum_window, new_prop_loss_db_per_km);
        out.interface_loss_db
            .insert(Band::Quantum, new_interface_loss_db);
        Ok(out)
    }
}

/// End-to-end loss breakdown for one wavelength.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub propagation_db: f64,
    pub interface_db: f64,
    pub total_db: f64,
    pub transmittance: f64,
}

impl LossBudget {
    pub fn from_components(propagation_db: f64, interface_db: f64) -> LossBudget {
        let total_db = propagation_db + interface_db;
        LossBudget {
            propagation_db,
            interface_db,
            total_db,
            transmittance: db_to_transmittance(total_db),
        }
    }
}

/// Power transmittance for a loss in dB.
///
/// ```
/// use hcqlink::fiber::db_to_transmittance;
/// let t = db_to_transmittance(5.421);
/// assert!((t - 0.28701196364644377).abs() < 1e-15);
/// assert!((db_to_transmittance(3.0) * db_to_transmittance(2.421) - t).abs() < 1e-15);
/// ```
pub fn db_to_transmittance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Membrane resonance wavelengths `lambda_1 .. lambda_m_max` in micrometers,
/// strictly decreasing in the order `m`.
///
/// ```
/// let lam = hcqlink::fiber::resonance_wavelengths(1.2, 1.45, 3).unwrap();
/// assert!((lam[0] - 2.52).abs() < 1e-12);
/// assert!((lam[1] - 1.26).abs() < 1e-12);
/// assert!((lam[2] - 0.84).abs() < 1e-12);
/// ```
pub fn resonance_wavelengths(
    thickness_um: f64,
    index: f64,
    m_max: u32,
) -> Result<Vec<f64>> {
    if thickness_um <= 0.0 || index <= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "need thickness > 0 and index > 1, got t={thickness_um}, n={index}"
        )));
    }
    if m_max < 1 {
        return Err(Error::InvalidParameter("m_max must be >= 1".into()));
    }
    let first = 2.0 * thickness_um * (index * index - 1.0).sqrt();
    Ok((1..=m_max).map(|m| first / m as f64).collect())
}

/// Anti-resonant window index for a wavelength: the `m` with
/// `lambda_m < wavelength < lambda_{m-1}` (window 1 extends above the first
/// resonance). Wavelengths within [`RESONANCE_GUARD_UM`] of a resonance are
/// an error.
pub fn window_index(wavelength_um: f64, thickness_um: f64, index: f64) -> Result<u32> {
    if wavelength_um <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "wavelength must be > 0, got {wavelength_um}"
        )));
    }
    let first = 2.0 * thickness_um * (index * index - 1.0).sqrt();
    if thickness_um <= 0.0 || index <= 1.0 {
        return Err(Error::InvalidParameter(
            "need thickness > 0 and index > 1".into(),
        ));
    }
    // lambda_m = first / m, so wavelength sits in window m = ceil(first / wavelength)
    // unless it is within the guard band of a resonance.
    let ratio = first / wavelength_um;
    let nearest = ratio.round().max(1.0) as u32;
    let lambda_nearest = first / nearest as f64;
    if (wavelength_um - lambda_nearest).abs() < RESONANCE_GUARD_UM {
        return Err(Error::OnResonance {
            wavelength_um,
            order: nearest,
            guard_um: RESONANCE_GUARD_UM,
        });
    }
    Ok(ratio.ceil().max(1.0) as u32)
}

/// End-to-end loss budget for one wavelength through the configured link.
///
/// ```
/// use std::collections::BTreeMap;
/// use hcqlink::fiber::{Band, FiberSpec, channel_loss};
///
/// let spec = FiberSpec {
///     membrane_thickness_um: 1.2,
///     refractive_index: 1.45,
///     window_loss_db_per_km: BTreeMap::from([(2, 1.9), (3, 0.65)]),
///     window_min_loss_db_per_km: BTreeMap::new(),
///     interface_loss_db: BTreeMap::from([(Band::Quantum, 2.6), (Band::Classical, 2.1)]),
///     length_km: 0.34,
///     num_interfaces: 2,
/// };
/// let budget = channel_loss(&spec, 0.934).unwrap();
/// assert!((budget.total_db - 5.421).abs() < 1e-12);
/// ```
pub fn channel_loss(spec: &FiberSpec, wavelength_um: f64) -> Result<LossBudget> {
    spec.validate()?;
    let window = window_index(
        wavelength_um,
        spec.membrane_thickness_um,
        spec.refractive_index,
    )?;
    let per_km = *spec
        .window_loss_db_per_km
        .get(&window)
        .ok_or(Error::MissingWindow(window))?;
    let band = band_for(wavelength_um);
    let per_interface = if spec.num_interfaces == 0 {
        0.0
    } else {
        *spec
            .interface_loss_db
            .get(&band)
            .ok_or_else(|| Error::MissingBand(band.to_string()))?
    };
    Ok(LossBudget::from_components(
        spec.length_km * per_km,
        spec.num_interfaces as f64 * per_interface,
    ))
}

/// Band assignment: everything below 1.2 um is the quantum band, the rest
/// the classical band. Only two interface-loss figures exist, so a simple
/// threshold is all the interpolation we do.
pub fn band_for(wavelength_um: f64) -> Band {
    if wavelength_um < 1.2 {
        Band::Quantum
    } else {
        Band::Classical
    }
}
