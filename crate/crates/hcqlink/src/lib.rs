//! Simulation and analysis toolkit for quantum-dot single-photon
//! communication over dual-band anti-resonant hollow-core fiber.
//!
//! The crate models the full chain from pulsed quantum-dot emission through
//! a hollow-core fiber channel to gated single-photon detection, and
//! provides the analysis used to characterize such links:
//!
//! * [`fiber`] — anti-resonant window placement and end-to-end loss budgets
//! * [`source`] — photon-number statistics and wave-packet overlap of the emitter
//! * [`link`] — loss thinning, detector imperfections, co-propagation background
//! * [`stats`] — coincidence histograms, g2(0) and HOM visibility extraction
//! * [`bb84`] — BB84 preparation, passive-basis measurement, sifting, QBER
//! * [`keyrate`] — asymptotic GLLP secure-key rates and distance limits
//! * [`config`] / [`scenario`] — run configuration, named presets, CSV output
//!
//! Everything downstream of a `(configuration, seed)` pair is deterministic,
//! including across parallel and serial execution, via counter-based random
//! number generation ([`rng`]).

pub mod bb84;
pub mod config;
pub mod error;
pub mod fiber;
pub mod keyrate;
pub mod link;
pub mod rng;
pub mod scenario;
pub mod source;
pub mod stats;

pub use error::{Error, Result};
