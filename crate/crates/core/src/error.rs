use thiserror::Error;

/// Errors raised by the simulation primitives.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("signals are defined on different time grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("signal is identically zero")]
    ZeroSignal,

    #[error("window of {window_s:e} s is not an integer multiple of the period {period_s:e} s")]
    NonIntegerPeriods { window_s: f64, period_s: f64 },

    #[error("frequency {freq_hz:e} Hz does not fall on the spectral bin grid")]
    OffGrid { freq_hz: f64 },

    #[error("frequency {freq_hz:e} Hz is at or beyond the grid Nyquist limit {nyquist_hz:e} Hz")]
    AboveNyquist { freq_hz: f64, nyquist_hz: f64 },

    #[error("sampler is not calibrated: {0}")]
    Uncalibrated(String),

    #[error("{0}")]
    Metric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
