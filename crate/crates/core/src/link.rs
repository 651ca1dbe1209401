//! Fiber, amplifier noise and coherent detection.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{apply_response, Signal};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// 0.1 nm at 1550 nm.
pub const OSNR_REFERENCE_BANDWIDTH: f64 = 12.5e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberSpec {
    pub length_km: f64,
    /// ps/(nm·km)
    pub dispersion: f64,
    /// dB/km
    pub attenuation: f64,
    pub reference_wavelength_nm: f64,
}

impl Default for FiberSpec {
    /// Zero-length standard single-mode fiber.
    fn default() -> Self {
        Self {
            length_km: 0.0,
            dispersion: 17.0,
            attenuation: 0.2,
            reference_wavelength_nm: 1550.0,
        }
    }
}

impl FiberSpec {
    pub fn smf(length_km: f64) -> Self {
        Self {
            length_km,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_km.is_finite() && self.length_km >= 0.0) {
            return Err(invalid("length_km", "must be >= 0"));
        }
        if !(self.attenuation.is_finite() && self.attenuation >= 0.0) {
            return Err(invalid("attenuation", "must be >= 0"));
        }
        if !self.dispersion.is_finite() {
            return Err(invalid("dispersion", "must be finite"));
        }
        if !(self.reference_wavelength_nm.is_finite() && self.reference_wavelength_nm > 0.0) {
            return Err(invalid("reference_wavelength_nm", "must be positive"));
        }
        Ok(())
    }

    /// Coefficient `k` of the spectral phase `k·f²`, in rad/Hz².
    pub fn phase_coefficient(&self) -> f64 {
        let lambda = self.reference_wavelength_nm * 1e-9;
        let d = self.dispersion * 1e-6; // s/m²
        let l = self.length_km * 1e3;
        PI * lambda * lambda / SPEED_OF_LIGHT * d * l
    }

    pub fn loss_factor(&self) -> f64 {
        10f64.powf(-self.attenuation * self.length_km / 20.0)
    }
}

/// Applies dispersion `exp(jk·f²)` and the span loss.
pub fn propagate(sig: &Signal, fiber: &FiberSpec) -> Result<Signal> {
    fiber.validate()?;
    let k = fiber.phase_coefficient();
    let loss = fiber.loss_factor();
    Ok(apply_response(sig, |f| Complex64::from_polar(loss, k * f * f)))
}

/// Removes the dispersion of `fiber`. The loss is not undone.
pub fn compensate_dispersion(sig: &Signal, fiber: &FiberSpec) -> Result<Signal> {
    fiber.validate()?;
    let k = fiber.phase_coefficient();
    Ok(apply_response(sig, |f| Complex64::from_polar(1.0, -k * f * f)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `null` in JSON disables the noise loader.
    #[serde(with = "crate::serde_inf")]
    pub osnr_db: f64,
    #[serde(default = "default_reference_bandwidth")]
    pub reference_bandwidth: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_reference_bandwidth() -> f64 {
    OSNR_REFERENCE_BANDWIDTH
}

impl NoiseSpec {
    pub fn new(osnr_db: f64, seed: u64) -> Self {
        Self {
            osnr_db,
            reference_bandwidth: OSNR_REFERENCE_BANDWIDTH,
            seed,
        }
    }

    pub fn noiseless() -> Self {
        Self::new(f64::INFINITY, 0)
    }
}

/// Loads circular white Gaussian noise so that signal power over the noise
/// power in `reference_bandwidth` equals the requested OSNR.
pub fn add_noise(sig: &Signal, noise: &NoiseSpec) -> Result<Signal> {
    if !(noise.reference_bandwidth.is_finite() && noise.reference_bandwidth > 0.0) {
        return Err(invalid("reference_bandwidth", "must be positive"));
    }
    if noise.osnr_db.is_nan() {
        return Err(invalid("osnr_db", "must be a number"));
    }
    let p = sig.power();
    if p == 0.0 {
        return Err(Error::ZeroSignal);
    }
    if noise.osnr_db == f64::INFINITY {
        return Ok(sig.clone());
    }
    let osnr = 10f64.powf(noise.osnr_db / 10.0);
    let density = p / (osnr * noise.reference_bandwidth);
    let variance = density * sig.grid().sample_rate;
    let normal = Normal::new(0.0, (0.5 * variance).sqrt()).map_err(|e| invalid("osnr_db", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let samples = sig
        .samples()
        .iter()
        .map(|x| x + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    Signal::new(*sig.grid(), samples)
}

/// Laser phase noise as a Wiener process with the given linewidth.
pub fn add_phase_noise(sig: &Signal, linewidth_hz: f64, seed: u64) -> Result<Signal> {
    if !(linewidth_hz.is_finite() && linewidth_hz >= 0.0) {
        return Err(invalid("linewidth_hz", "must be >= 0"));
    }
    if linewidth_hz == 0.0 {
        return Ok(sig.clone());
    }
    let sigma = (2.0 * PI * linewidth_hz * sig.grid().dt()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut phase = 0.0;
    let samples = sig
        .samples()
        .iter()
        .map(|x| {
            let step: f64 = StandardNormal.sample(&mut rng);
            phase += sigma * step;
            x * Complex64::from_polar(1.0, phase)
        })
        .collect();
    Signal::new(*sig.grid(), samples)
}

/// Ideal homodyne receiver: scales the envelope by `√lo_power` and rotates it
/// by `−lo_phase`.
pub fn coherent_detect(sig: &Signal, lo_power: f64, lo_phase: f64) -> Result<Signal> {
    if !(lo_power.is_finite() && lo_power > 0.0) {
        return Err(invalid("lo_power", "must be positive"));
    }
    Ok(sig.scale(Complex64::from_polar(lo_power.sqrt(), -lo_phase)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TimeGrid;

    fn tone(f: f64) -> Signal {
        let grid = TimeGrid::new(160e9, 1600, 0.0).unwrap();
        Signal::from_fn(grid, |t| Complex64::from_polar(1.0, 2.0 * PI * f * t))
    }

    #[test]
    fn zero_length_is_identity() {
        let s = tone(10e9);
        let out = propagate(&s, &FiberSpec::smf(0.0)).unwrap();
        for (a, b) in out.samples().iter().zip(s.samples()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn tone_phase_and_loss() {
        let fiber = FiberSpec::smf(30.0);
        let s = tone(10e9);
        let out = propagate(&s, &fiber).unwrap();
        let ratio = out.samples()[17] / s.samples()[17];
        let expect = PI * 1550e-9f64.powi(2) / SPEED_OF_LIGHT * 17e-6 * 30e3 * 1e20;
        assert!((ratio.arg() - expect).abs() < 1e-9 * expect);
        assert!((ratio.norm() - 10f64.powf(-0.3)).abs() < 1e-12);
        assert!((expect - 1.284).abs() < 1e-3);
    }

    #[test]
    fn compensation_inverts() {
        let fiber = FiberSpec {
            attenuation: 0.0,
            ..FiberSpec::smf(80.0)
        };
        let s = tone(7e9).add(&tone(-23e9)).unwrap();
        let back = compensate_dispersion(&propagate(&s, &fiber).unwrap(), &fiber).unwrap();
        for (a, b) in back.samples().iter().zip(s.samples()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn fiber_validation() {
        assert!(FiberSpec::smf(-1.0).validate().is_err());
        assert!(FiberSpec { attenuation: -0.1, ..FiberSpec::default() }.validate().is_err());
    }

    #[test]
    fn noise_level_and_determinism() {
        let s = tone(1e9);
        let spec = NoiseSpec::new(20.0, 7);
        let a = add_noise(&s, &spec).unwrap();
        let b = add_noise(&s, &spec).unwrap();
        assert_eq!(a, b);
        let n = a.sub(&s).unwrap();
        let measured = 10.0 * (s.power() / (n.power() * OSNR_REFERENCE_BANDWIDTH / 160e9)).log10();
        assert!((measured - 20.0).abs() < 0.5, "{measured}");
        let c = add_noise(&s, &NoiseSpec::new(20.0, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn infinite_osnr_and_zero_signal() {
        let s = tone(1e9);
        assert_eq!(add_noise(&s, &NoiseSpec::noiseless()).unwrap(), s);
        let z = Signal::zeros(*s.grid());
        assert!(matches!(add_noise(&z, &NoiseSpec::new(30.0, 1)), Err(Error::ZeroSignal)));
    }

    #[test]
    fn noise_spec_json() {
        let text = serde_json::to_string(&NoiseSpec::noiseless()).unwrap();
        assert!(text.contains("\"osnr_db\":null"));
        let back: NoiseSpec = serde_json::from_str(r#"{"osnr_db": 33, "seed": 4}"#).unwrap();
        assert_eq!(back, NoiseSpec::new(33.0, 4));
    }

    #[test]
    fn detection_rotates_and_scales() {
        let s = tone(2e9);
        assert_eq!(coherent_detect(&s, 1.0, 0.0).unwrap(), s);
        let r = coherent_detect(&s, 4.0, PI / 2.0).unwrap();
        let ratio = r.samples()[3] / s.samples()[3];
        assert!((ratio - Complex64::new(0.0, -2.0)).norm() < 1e-12);
        assert!(coherent_detect(&s, 0.0, 0.0).is_err());
    }

    #[test]
    fn phase_noise_keeps_magnitude() {
        let s = tone(2e9);
        let out = add_phase_noise(&s, 1e6, 3).unwrap();
        for (a, b) in out.samples().iter().zip(s.samples()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert_eq!(add_phase_noise(&s, 0.0, 3).unwrap(), s);
    }
}
