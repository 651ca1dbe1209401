//! Dual-drive Mach-Zehnder modulator.
//!
//! The modulator multiplies the optical field by
//! `loss·½·[a₁·exp(jφ₁(t)) + a₂·exp(jφ₂(t))]` with
//! `φᵢ(t) = biasᵢ + Σ_tones π·Aᵢ·g(f)/Vπ · sin(2πft + phaseᵢ)`, where `g` is
//! the electro-optic response and `aᵢ ≤ 1` the static arm amplitude implied
//! by the arm's DC extinction. Driven with `n` phase-locked tones on a CW
//! input it produces a `2n+1`-line comb; on a data signal it convolves the
//! spectrum with that comb.

mod calibrate;
mod comb;
mod search;

pub use calibrate::{calibrate_flat_comb, CalibrationOptions, CombCalibration};
pub use comb::{comb_report, CombReport};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::Signal;

/// Shape of the electro-optic magnitude response between DC and the 3 dB point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EoModel {
    /// `1/√(1 + (f/f₃)²)`
    #[default]
    SinglePole,
    /// `exp(−ln2·(f/f₃)²/2)`
    Gaussian,
    /// Unity at all frequencies.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MzmParams {
    /// Half-wave voltage, V.
    pub v_pi: f64,
    /// Electro-optic 3 dB bandwidth, Hz.
    pub eo_3db_bandwidth: f64,
    /// DC extinction of each arm against an ideal partner arm, dB.
    /// `f64::INFINITY` (JSON `null`) means a perfectly balanced arm.
    #[serde(with = "crate::serde_inf")]
    pub dc_extinction_arm1_db: f64,
    #[serde(with = "crate::serde_inf")]
    pub dc_extinction_arm2_db: f64,
    pub insertion_loss_db: f64,
    pub eo_model: EoModel,
}

impl Default for MzmParams {
    /// The silicon segmented modulator: Vπ = 420 mV, 16 GHz EO bandwidth,
    /// 40/37 dB arm extinction.
    fn default() -> Self {
        Self {
            v_pi: 0.42,
            eo_3db_bandwidth: 16e9,
            dc_extinction_arm1_db: 40.0,
            dc_extinction_arm2_db: 37.0,
            insertion_loss_db: 0.0,
            eo_model: EoModel::SinglePole,
        }
    }
}

impl MzmParams {
    /// Lossless modulator with flat EO response and infinite extinction.
    pub fn ideal() -> Self {
        Self {
            v_pi: 0.42,
            eo_3db_bandwidth: 16e9,
            dc_extinction_arm1_db: f64::INFINITY,
            dc_extinction_arm2_db: f64::INFINITY,
            insertion_loss_db: 0.0,
            eo_model: EoModel::Flat,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi.is_finite() && self.v_pi > 0.0) {
            return Err(invalid("v_pi", "must be positive"));
        }
        if !(self.eo_3db_bandwidth.is_finite() && self.eo_3db_bandwidth > 0.0) {
            return Err(invalid("eo_3db_bandwidth", "must be positive"));
        }
        for (name, er) in [
            ("dc_extinction_arm1_db", self.dc_extinction_arm1_db),
            ("dc_extinction_arm2_db", self.dc_extinction_arm2_db),
        ] {
            if er.is_nan() || er <= 0.0 {
                return Err(invalid(name, "must be > 0 dB"));
            }
        }
        if !(self.insertion_loss_db.is_finite() && self.insertion_loss_db >= 0.0) {
            return Err(invalid("insertion_loss_db", "must be >= 0 dB"));
        }
        Ok(())
    }

    /// Field amplitude of an arm whose extinction against an ideal unit arm
    /// is `er_db`: `(√ER − 1)/(√ER + 1)`.
    pub fn arm_amplitude(er_db: f64) -> f64 {
        if er_db.is_infinite() {
            return 1.0;
        }
        let r = 10f64.powf(er_db / 20.0);
        (r - 1.0) / (r + 1.0)
    }

    /// `(a₁, a₂)`.
    pub fn arm_amplitudes(&self) -> (f64, f64) {
        (
            Self::arm_amplitude(self.dc_extinction_arm1_db),
            Self::arm_amplitude(self.dc_extinction_arm2_db),
        )
    }

    pub fn loss_factor(&self) -> f64 {
        10f64.powf(-self.insertion_loss_db / 20.0)
    }
}

/// Normalised electro-optic magnitude response, `1` at DC and `1/√2` at the
/// 3 dB bandwidth. Symmetric in `f`.
pub fn eo_response(f: f64, params: &MzmParams) -> f64 {
    let x = f.abs() / params.eo_3db_bandwidth;
    match params.eo_model {
        EoModel::SinglePole => 1.0 / (1.0 + x * x).sqrt(),
        EoModel::Gaussian => (-0.5 * std::f64::consts::LN_2 * x * x).exp(),
        EoModel::Flat => 1.0,
    }
}

/// One phase-locked RF drive tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveTone {
    pub frequency: f64,
    pub amplitude_arm1: f64,
    pub amplitude_arm2: f64,
    pub phase_arm1: f64,
    pub phase_arm2: f64,
}

/// RF tones plus heater bias phases. `n` tones drive a `2n+1`-line comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrivePlan {
    pub tones: Vec<DriveTone>,
    pub bias_arm1: f64,
    pub bias_arm2: f64,
}

impl DrivePlan {
    /// Push-pull plan: arm 2 gets the same amplitude in anti-phase. Each
    /// tuple is `(frequency, amplitude, phase)`; the bias difference is split
    /// symmetrically across the arms.
    pub fn push_pull(tones: &[(f64, f64, f64)], bias_difference: f64) -> Self {
        Self {
            tones: tones
                .iter()
                .map(|&(frequency, amplitude, phase)| DriveTone {
                    frequency,
                    amplitude_arm1: amplitude,
                    amplitude_arm2: amplitude,
                    phase_arm1: phase,
                    phase_arm2: phase + PI,
                })
                .collect(),
            bias_arm1: 0.5 * bias_difference,
            bias_arm2: -0.5 * bias_difference,
        }
    }

    pub fn unmodulated(bias_arm1: f64, bias_arm2: f64) -> Self {
        Self {
            tones: Vec::new(),
            bias_arm1,
            bias_arm2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, t) in self.tones.iter().enumerate() {
            if !(t.frequency.is_finite() && t.frequency > 0.0) {
                return Err(invalid("tones", format!("tone {i} frequency must be positive")));
            }
            if self.tones[..i]
                .iter()
                .any(|o| ((o.frequency - t.frequency) / t.frequency).abs() < 1e-12)
            {
                return Err(invalid("tones", format!("tone {i} duplicates another frequency")));
            }
        }
        Ok(())
    }

    /// Comb line count `2n + 1`.
    pub fn n_lines(&self) -> usize {
        2 * self.tones.len() + 1
    }

    /// Plan whose transfer is this one delayed by `delay` seconds.
    pub fn time_shifted(&self, delay: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.tones {
            let dphi = 2.0 * PI * t.frequency * delay;
            t.phase_arm1 -= dphi;
            t.phase_arm2 -= dphi;
        }
        out
    }
}

/// Field transfer of a drive plan on a given device, ready to evaluate.
#[derive(Debug, Clone)]
pub(crate) struct Transfer {
    omega: Vec<f64>,
    index1: Vec<f64>,
    index2: Vec<f64>,
    phase1: Vec<f64>,
    phase2: Vec<f64>,
    arm1: Complex64,
    arm2: Complex64,
}

impl Transfer {
    pub(crate) fn new(plan: &DrivePlan, params: &MzmParams) -> Self {
        let (a1, a2) = params.arm_amplitudes();
        let half_loss = 0.5 * params.loss_factor();
        let depth = |amp: f64, f: f64| PI * amp * eo_response(f, params) / params.v_pi;
        Self {
            omega: plan.tones.iter().map(|t| 2.0 * PI * t.frequency).collect(),
            index1: plan.tones.iter().map(|t| depth(t.amplitude_arm1, t.frequency)).collect(),
            index2: plan.tones.iter().map(|t| depth(t.amplitude_arm2, t.frequency)).collect(),
            phase1: plan.tones.iter().map(|t| t.phase_arm1).collect(),
            phase2: plan.tones.iter().map(|t| t.phase_arm2).collect(),
            arm1: Complex64::from_polar(half_loss * a1, plan.bias_arm1),
            arm2: Complex64::from_polar(half_loss * a2, plan.bias_arm2),
        }
    }

    pub(crate) fn at(&self, t: f64) -> Complex64 {
        let mut p1 = 0.0;
        let mut p2 = 0.0;
        for j in 0..self.omega.len() {
            let wt = self.omega[j] * t;
            p1 += self.index1[j] * (wt + self.phase1[j]).sin();
            p2 += self.index2[j] * (wt + self.phase2[j]).sin();
        }
        self.arm1 * Complex64::from_polar(1.0, p1) + self.arm2 * Complex64::from_polar(1.0, p2)
    }
}

/// Passes `field_in` through the modulator driven by `plan`.
pub fn modulate(field_in: &Signal, plan: &DrivePlan, params: &MzmParams) -> Result<Signal> {
    params.validate()?;
    plan.validate()?;
    let nyquist = field_in.grid().nyquist();
    if let Some(t) = plan.tones.iter().find(|t| t.frequency >= nyquist) {
        return Err(Error::AboveNyquist {
            freq_hz: t.frequency,
            nyquist_hz: nyquist,
        });
    }
    let transfer = Transfer::new(plan, params);
    let grid = *field_in.grid();
    let samples = field_in
        .samples()
        .iter()
        .enumerate()
        .map(|(i, x)| x * transfer.at(grid.time(i)))
        .collect();
    Signal::new(grid, samples)
}
