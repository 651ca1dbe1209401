//! Simulation of sinc-shaped Nyquist OTDM: flat-comb sampling sequences,
//! multiplexing, MZM-based demultiplexing, fiber transmission and QAM
//! metrics.
//!
//! Field envelopes are complex baseband samples in √mW on a uniform
//! [`TimeGrid`]. Windows are treated as periodic throughout, so every
//! frequency-domain operator is exact on signals built from whole periods.

pub mod demux;
mod error;
pub mod link;
pub mod modem;
pub mod mzm;
pub mod nyquist;
mod serde_inf;
pub mod signal;
pub mod signal_io;

pub use error::{Error, Result};
pub use signal::{Signal, Spectrum, TimeGrid};
