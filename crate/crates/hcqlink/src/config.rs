//! Run configuration: a single strict JSON document describing the fiber,
//! source, receiver, protocol and analysis settings of one scenario run.
//! Unknown keys are rejected and validation errors name the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bb84::{Encoding, ReceiverSpec};
use crate::error::{Error, Result};
use crate::fiber::FiberSpec;
use crate::link::CoPropagationSpec;
use crate::source::{target_g2_to_p2, SourceSpec};

/// Scenario pipeline selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Hanbury Brown-Twiss autocorrelation: g2(0) extraction.
    Hbt,
    /// Hong-Ou-Mandel two-photon interference: visibility extraction.
    Hom,
    /// BB84 with polarization encoding: sifted rate and QBER.
    Bb84Pol,
    /// BB84 with time-bin encoding: per-state QBER.
    Bb84Timebin,
    /// GLLP key-rate and distance curves.
    Keyrate,
    /// Resonances, window assignments and loss budgets.
    FiberReport,
    /// Classical co-propagation background null test.
    CopropNull,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Hbt => "hbt",
            ScenarioKind::Hom => "hom",
            ScenarioKind::Bb84Pol => "bb84_pol",
            ScenarioKind::Bb84Timebin => "bb84_timebin",
            ScenarioKind::Keyrate => "keyrate",
            ScenarioKind::FiberReport => "fiber_report",
            ScenarioKind::CopropNull => "coprop_null",
        }
    }
}

/// Source section: the photon-number distribution can be given directly
/// (`p2`) or via a target g2(0) that is inverted at load time. The
/// wave-packet overlap can likewise be given directly or calibrated from a
/// target raw HOM visibility when the scenario runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub rep_rate_hz: f64,
    pub p1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g2_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavepacket_overlap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hom_target_visibility: Option<f64>,
    #[serde(default = "default_pulse_area")]
    pub pulse_area_rad: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength_um: f64,
}

fn default_pulse_area() -> f64 {
    std::f64::consts::PI
}
fn default_wavelength() -> f64 {
    0.9339
}

impl SourceConfig {
    /// Resolve to a concrete spec; `overlap` may still be overridden later
    /// by the HOM-visibility calibration, which needs channel context.
    pub fn resolve(&self) -> Result<SourceSpec> {
        if self.wavepacket_overlap.is_some() && self.hom_target_visibility.is_some() {
            return Err(Error::Config {
                key: "source.wavepacket_overlap".into(),
                message: "give either wavepacket_overlap or hom_target_visibility, not both".into(),
            });
        }
        let p2 = match (self.p2, self.g2_target) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    key: "source.p2".into(),
                    message: "give either p2 or g2_target, not both".into(),
                })
            }
            (Some(p2), None) => p2,
            (None, Some(g2)) => target_g2_to_p2(g2, self.p1).map_err(|e| Error::Config {
                key: "source.g2_target".into(),
                message: e.to_string(),
            })?,
            (None, None) => 0.0,
        };
        let spec = SourceSpec {
            rep_rate_hz: self.rep_rate_hz,
            p1: self.p1,
            p2,
            wavepacket_overlap: self.wavepacket_overlap.unwrap_or(1.0),
            pulse_area_rad: self.pulse_area_rad,
            wavelength_um: self.wavelength_um,
        };
        spec.validate().map_err(|e| Error::Config {
            key: "source".into(),
            message: e.to_string(),
        })?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default = "default_encoding")]
    pub encoding: Encoding,
    /// Number of protocol rounds, or excitation pulses for HBT/HOM runs.
    #[serde(default = "default_rounds")]
    pub rounds: u64,
}

fn default_encoding() -> Encoding {
    Encoding::Polarization
}
fn default_rounds() -> u64 {
    10_000_000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default = "default_bin_width")]
    pub bin_width_ps: i64,
    #[serde(default = "default_span")]
    pub span_ps: i64,
    #[serde(default = "default_window")]
    pub window_ps: i64,
    /// Side-peak orders excluded from the uncorrelated mean. When absent,
    /// g2 runs exclude nothing and HOM runs exclude the nearest peaks (±1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_orders: Option<Vec<i32>>,
}

fn default_bin_width() -> i64 {
    100
}
fn default_span() -> i64 {
    62_500
}
fn default_window() -> i64 {
    12_500
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyRateConfig {
    #[serde(default = "default_f_ec")]
    pub f_ec: f64,
    #[serde(default = "default_sift")]
    pub sift_factor_q: f64,
    #[serde(default = "default_max_loss")]
    pub max_extra_loss_db: f64,
    #[serde(default = "default_steps")]
    pub loss_steps: usize,
    #[serde(default = "default_grid")]
    pub prop_loss_grid_db_per_km: Vec<f64>,
    /// Improved-fabrication comparison scenario (propagation, per-interface).
    #[serde(default = "default_improved_prop")]
    pub improved_prop_loss_db_per_km: f64,
    #[serde(default = "default_improved_iface")]
    pub improved_interface_loss_db: f64,
}

fn default_f_ec() -> f64 {
    1.16
}
fn default_sift() -> f64 {
    0.5
}
fn default_max_loss() -> f64 {
    30.0
}
fn default_steps() -> usize {
    301
}
fn default_grid() -> Vec<f64> {
    (1..=40).map(|i| i as f64 * 0.05).collect()
}
fn default_improved_prop() -> f64 {
    0.12
}
fn default_improved_iface() -> f64 {
    0.2
}

impl Default for KeyRateConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

/// Full run configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub scenario_name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub fiber: FiberSpec,
    pub source: SourceConfig,
    pub receiver: ReceiverSpec,
    #[serde(default = "default_coprop")]
    pub coprop: CoPropagationSpec,
    #[serde(default = "default_protocol")]
    pub protocol: ProtocolConfig,
    #[serde(default = "default_analysis")]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub keyrate: KeyRateConfig,
    /// Also dump raw time tags as CSV where the scenario produces them.
    #[serde(default)]
    pub dump_time_tags: bool,
}

fn default_seed() -> u64 {
    1
}
fn default_coprop() -> CoPropagationSpec {
    CoPropagationSpec {
        classical_power_mw: 0.0,
        crosstalk_rate_hz_per_mw: 0.0,
    }
}
fn default_protocol() -> ProtocolConfig {
    serde_json::from_str("{}").expect("defaults")
}
fn default_analysis() -> AnalysisConfig {
    serde_json::from_str("{}").expect("defaults")
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.fiber.validate().map_err(|e| Error::Config {
            key: "fiber".into(),
            message: e.to_string(),
        })?;
        if self.fiber.length_km < 0.0 {
            return Err(Error::Config {
                key: "fiber.length".into(),
                message: "length must be >= 0".into(),
            });
        }
        self.source.resolve()?;
        self.receiver.validate().map_err(|e| Error::Config {
            key: "receiver".into(),
            message: e.to_string(),
        })?;
        self.coprop.validate().map_err(|e| Error::Config {
            key: "coprop".into(),
            message: e.to_string(),
        })?;
        if self.analysis.bin_width_ps <= 0
            || self.analysis.span_ps <= 0
            || self.analysis.span_ps % self.analysis.bin_width_ps != 0
        {
            return Err(Error::Config {
                key: "analysis.bin_width_ps".into(),
                message: "bin width must be positive and divide the span".into(),
            });
        }
        if self.keyrate.f_ec < 1.0 {
            return Err(Error::Config {
                key: "keyrate.f_ec".into(),
                message: "error-correction inefficiency must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        if self.scenario_name.is_empty() {
            self.scenario.as_str().to_string()
        } else {
            self.scenario_name.clone()
        }
    }
}

/// Load and validate a run configuration from a JSON file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Config {
        key: path.display().to_string(),
        message: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}
