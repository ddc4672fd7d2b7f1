use thiserror::Error;

/// Unified error type for the simulator and analysis toolkit.
#[derive(Error, Debug)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wavelength {wavelength_um} um is on resonance m={order} (within {guard_um} um)")]
    OnResonance {
        wavelength_um: f64,
        order: u32,
        guard_um: f64,
    },

    #[error("no attenuation entry for anti-resonant window {0}")]
    MissingWindow(u32),

    #[error("no interface loss entry for band {0}")]
    MissingBand(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("time-tag streams have different durations ({0} ps vs {1} ps)")]
    DurationMismatch(i64, i64),

    #[error("time-tag stream is not sorted at record {0}")]
    UnsortedInput(usize),

    #[error("histogram span {span_ps} ps does not cover peak order {order} at window {window_ps} ps")]
    SpanTooSmall {
        span_ps: i64,
        order: i32,
        window_ps: i64,
    },

    #[error("no side peaks left after exclusion")]
    EmptySides,

    #[error("side-peak mean is zero with nonzero central area")]
    ZeroSideArea,

    #[error("round count mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("infeasible physics: {0}")]
    Infeasible(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("scenario mismatch: cannot compare `{0}` with `{1}`")]
    ScenarioMismatch(String, String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
