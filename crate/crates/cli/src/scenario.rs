//! Scenario files: versioned JSON, unknown keys rejected.

use std::path::Path;

use otdm_core::demux::ChannelPlan;
use otdm_core::link::{FiberSpec, SPEED_OF_LIGHT};
use otdm_core::modem::{Constellation, Format};
use otdm_core::mzm::{CalibrationOptions, MzmParams};
use otdm_core::TimeGrid;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// transmit, impair, demultiplex every branch and measure
    #[default]
    Transmission,
    /// calibrate the modulator comb only
    Comb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Compensation {
    None,
    #[default]
    Full,
    /// Applies the fiber dispersion a second time.
    WrongSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberConfig {
    pub length_km: f64,
    /// ps/(nm·km)
    pub dispersion: f64,
    /// dB/km
    pub attenuation: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        let smf = FiberSpec::default();
        Self {
            length_km: smf.length_km,
            dispersion: smf.dispersion,
            attenuation: smf.attenuation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// `null` disables the noise loader.
    pub osnr_db: Option<f64>,
    pub reference_bandwidth_ghz: f64,
    /// Transmit laser linewidth; 0 turns phase noise off.
    pub linewidth_hz: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            osnr_db: None,
            reference_bandwidth_ghz: 12.5,
            linewidth_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Ideal,
    Mzm,
}

/// `device` and `calibration` are only read by the `mzm` kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub device: MzmParams,
    pub calibration: CalibrationOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub lo_power_mw: f64,
    pub lo_phase_rad: f64,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            lo_power_mw: 1.0,
            lo_phase_rad: 0.0,
        }
    }
}

/// Comb-only mode settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombConfig {
    pub lines: usize,
    pub spacing_ghz: f64,
    pub samples_per_period: usize,
}

impl Default for CombConfig {
    fn default() -> Self {
        Self {
            lines: 3,
            spacing_ghz: 10.0,
            samples_per_period: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub metrics: bool,
    pub spectra: bool,
    pub constellation: bool,
    pub eye: bool,
    /// Symbols per branch written to the eye file.
    pub eye_symbols: usize,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            metrics: true,
            spectra: true,
            constellation: true,
            eye: true,
            eye_symbols: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_carrier")]
    pub carrier_frequency_thz: f64,
    /// Scalar field loss applied at the transmitter, dB.
    #[serde(default)]
    pub carrier_loss_db: f64,
    #[serde(default = "default_branches")]
    pub n_branches: usize,
    #[serde(default = "default_bandwidth")]
    pub aggregate_bandwidth_ghz: f64,
    #[serde(default = "default_format")]
    pub format: Format,
    /// `null` means `B/N`. Lower rates must divide `B/N`.
    #[serde(default)]
    pub branch_symbol_rate_gbd: Option<f64>,
    #[serde(default)]
    pub rolloff: f64,
    #[serde(default = "default_symbols")]
    pub symbols_per_branch: usize,
    /// Samples per aggregate slot `1/B`.
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
    #[serde(default)]
    pub launch_power_dbm: f64,
    #[serde(default)]
    pub fiber: FiberConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub compensation: Compensation,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub comb: CombConfig,
    #[serde(default)]
    pub outputs: Outputs,
    /// Blocks used for the ± spread of EVM and Q.
    #[serde(default = "default_blocks")]
    pub metric_blocks: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_carrier() -> f64 {
    193.4
}
fn default_branches() -> usize {
    3
}
fn default_bandwidth() -> f64 {
    24.0
}
fn default_format() -> Format {
    Format::Qpsk
}
fn default_symbols() -> usize {
    1023
}
fn default_oversampling() -> usize {
    8
}
fn default_blocks() -> usize {
    8
}

impl Default for Scenario {
    fn default() -> Self {
        serde_json::from_value(serde_json::json!({ "schema_version": SCHEMA_VERSION })).expect("defaults parse")
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(if path == "." { "scenario".into() } else { path }, e.into_inner().to_string())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        Self::from_json(&value.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn aggregate_bandwidth(&self) -> f64 {
        self.aggregate_bandwidth_ghz * 1e9
    }

    pub fn branch_symbol_rate(&self) -> f64 {
        match self.branch_symbol_rate_gbd {
            Some(r) => r * 1e9,
            None => self.aggregate_bandwidth() / self.n_branches as f64,
        }
    }

    /// `B/(N·R)`, the number of sinc-sequence periods per branch symbol.
    pub fn rate_divider(&self) -> usize {
        (self.aggregate_bandwidth() / (self.n_branches as f64 * self.branch_symbol_rate())).round() as usize
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.oversampling * self.n_branches * self.rate_divider()
    }

    pub fn plan(&self, branch: usize) -> Result<ChannelPlan> {
        Ok(ChannelPlan::new(self.n_branches, self.aggregate_bandwidth(), branch)?)
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.format)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::periodic(
            1.0 / self.branch_symbol_rate(),
            self.symbols_per_branch,
            self.samples_per_symbol(),
        )?)
    }

    pub fn wavelength_nm(&self) -> f64 {
        SPEED_OF_LIGHT / (self.carrier_frequency_thz * 1e12) * 1e9
    }

    pub fn fiber_spec(&self) -> FiberSpec {
        FiberSpec {
            length_km: self.fiber.length_km,
            dispersion: self.fiber.dispersion,
            attenuation: self.fiber.attenuation,
            reference_wavelength_nm: self.wavelength_nm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(CliError::config(field, msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            );
        }
        if !(self.carrier_frequency_thz.is_finite() && self.carrier_frequency_thz > 0.0) {
            return bad("carrier_frequency_thz", "must be positive".into());
        }
        if !(self.carrier_loss_db.is_finite() && self.carrier_loss_db >= 0.0) {
            return bad("carrier_loss_db", "must be >= 0".into());
        }
        if !self.launch_power_dbm.is_finite() {
            return bad("launch_power_dbm", "must be finite".into());
        }
        if self.mode == Mode::Comb {
            return self.validate_comb();
        }
        if self.n_branches < 3 || self.n_branches.is_multiple_of(2) {
            return bad("n_branches", format!("must be odd and >= 3, got {}", self.n_branches));
        }
        if !(self.aggregate_bandwidth_ghz.is_finite() && self.aggregate_bandwidth_ghz > 0.0) {
            return bad("aggregate_bandwidth_ghz", "must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return bad("rolloff", format!("must be in [0, 1], got {}", self.rolloff));
        }
        let top = self.aggregate_bandwidth() / self.n_branches as f64;
        let rate = self.branch_symbol_rate();
        if !(rate.is_finite() && rate > 0.0) {
            return bad("branch_symbol_rate_gbd", "must be positive".into());
        }
        let divider = top / rate;
        if divider < 1.0 - 1e-9 || (divider - divider.round()).abs() > 1e-9 {
            return bad(
                "branch_symbol_rate_gbd",
                format!("B/N = {} GBd must be an integer multiple of the branch rate", top / 1e9),
            );
        }
        if (1.0 + self.rolloff) * rate > top * (1.0 + 1e-9) {
            return bad(
                "rolloff",
                format!(
                    "occupied bandwidth (1 + rolloff)·R = {} GHz exceeds B/N = {} GHz",
                    (1.0 + self.rolloff) * rate / 1e9,
                    top / 1e9
                ),
            );
        }
        if self.symbols_per_branch < 3 || self.symbols_per_branch.is_multiple_of(2) {
            return bad("symbols_per_branch", format!("must be odd and >= 3, got {}", self.symbols_per_branch));
        }
        if self.oversampling < 2 {
            return bad("oversampling", "must be at least 2 samples per slot".into());
        }
        let f = self.fiber;
        if !(f.length_km.is_finite() && f.length_km >= 0.0) {
            return bad("fiber.length_km", "must be >= 0".into());
        }
        if !f.dispersion.is_finite() {
            return bad("fiber.dispersion", "must be finite".into());
        }
        if !(f.attenuation.is_finite() && f.attenuation >= 0.0) {
            return bad("fiber.attenuation", "must be >= 0".into());
        }
        if let Some(o) = self.noise.osnr_db {
            if !o.is_finite() {
                return bad("noise.osnr_db", "must be finite or null".into());
            }
        }
        if !(self.noise.reference_bandwidth_ghz.is_finite() && self.noise.reference_bandwidth_ghz > 0.0) {
            return bad("noise.reference_bandwidth_ghz", "must be positive".into());
        }
        if !(self.noise.linewidth_hz.is_finite() && self.noise.linewidth_hz >= 0.0) {
            return bad("noise.linewidth_hz", "must be >= 0".into());
        }
        if !(self.receiver.lo_power_mw.is_finite() && self.receiver.lo_power_mw > 0.0) {
            return bad("receiver.lo_power_mw", "must be positive".into());
        }
        if !self.receiver.lo_phase_rad.is_finite() {
            return bad("receiver.lo_phase_rad", "must be finite".into());
        }
        if self.metric_blocks == 0 || self.metric_blocks > self.symbols_per_branch {
            return bad("metric_blocks", "must be between 1 and symbols_per_branch".into());
        }
        self.validate_device()
    }

    fn validate_comb(&self) -> Result<()> {
        let c = self.comb;
        if c.lines < 3 || c.lines.is_multiple_of(2) {
            return Err(CliError::config("comb.lines", format!("must be odd and >= 3, got {}", c.lines)));
        }
        if !(c.spacing_ghz.is_finite() && c.spacing_ghz > 0.0) {
            return Err(CliError::config("comb.spacing_ghz", "must be positive"));
        }
        if c.samples_per_period <= 2 * c.lines {
            return Err(CliError::config(
                "comb.samples_per_period",
                format!("must exceed 2·lines = {}", 2 * c.lines),
            ));
        }
        if self.sampler.kind != SamplerKind::Mzm {
            return Err(CliError::config("sampler.kind", "comb mode needs an mzm sampler"));
        }
        self.validate_device()
    }

    fn validate_device(&self) -> Result<()> {
        if self.sampler.kind == SamplerKind::Mzm {
            self.sampler.device.validate().map_err(|e| match e {
                otdm_core::Error::InvalidParameter { name, reason } => {
                    CliError::config(format!("sampler.device.{name}"), reason)
                }
                other => other.into(),
            })?;
        }
        Ok(())
    }
}
