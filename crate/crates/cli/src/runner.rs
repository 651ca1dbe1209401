//! Scenario execution.

use std::collections::HashMap;

use num_complex::Complex64;
use otdm_core::demux::{sample_at, sample_with_sequence, MzmSampler, Sampler};
use otdm_core::link::{
    add_noise, add_phase_noise, coherent_detect, compensate_dispersion, propagate, FiberSpec, NoiseSpec,
};
use otdm_core::modem::{measure, qam_map, MetricsReport};
use otdm_core::mzm::{calibrate_flat_comb, modulate, CalibrationOptions, CombCalibration, MzmParams};
use otdm_core::nyquist::{otdm_multiplex_signals, raised_cosine_shape, sinc_sequence, SincSequenceSpec};
use otdm_core::signal::{brickwall_lowpass, dbm_to_mw, fit_gain, normalize, rmse_percent, spectrum};
use otdm_core::{Signal, Spectrum, TimeGrid};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scenario::{Compensation, Mode, SamplerKind, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub branch: usize,
    pub symbol_rate: f64,
    /// Complex gain removed before measuring, from a least-squares fit
    /// against the transmitted symbols.
    pub receiver_gain: Complex64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombSummary {
    pub calibration: CombCalibration,
    /// Normalised transfer against the ideal sinc sequence.
    pub rmse_percent: f64,
}

#[derive(Debug, Clone, Default)]
pub struct BranchTrace {
    pub spectrum_after: Option<Spectrum>,
    /// received point and the index of the decided constellation point
    pub constellation: Vec<(Complex64, usize)>,
    /// time modulo two symbols (in symbols) and in-phase amplitude
    pub eye: Vec<(f64, f64)>,
}

/// Waveform data behind the plot files. Not part of `report.json`.
#[derive(Debug, Clone, Default)]
pub struct Traces {
    pub spectrum_before: Option<Spectrum>,
    pub branches: Vec<BranchTrace>,
    pub comb_spectrum: Option<Spectrum>,
    /// normalised modulator transfer and the ideal sequence
    pub comb_waveform: Option<(Signal, Signal)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    /// Resolved configuration; re-running it reproduces this bundle.
    pub scenario: Scenario,
    pub noise_seed: u64,
    pub sample_rate: f64,
    pub n_samples: usize,
    pub branches: Vec<BranchReport>,
    pub comb: Option<CombSummary>,
    #[serde(skip)]
    pub traces: Traces,
}

impl ReportBundle {
    pub fn metrics_table(&self) -> String {
        let mut out = format!(
            "{:>6} {:>16} {:>16} {:>16} {:>11} {:>11} {:>14}\n",
            "branch", "evm_%", "q_i_dB", "q_q_dB", "ber_est", "ber_count", "errors/bits"
        );
        for b in &self.branches {
            let m = &b.metrics;
            let pm = |e: &otdm_core::modem::Estimate| format!("{:.3}±{:.3}", e.mean, e.std);
            out += &format!(
                "{:>6} {:>16} {:>16} {:>16} {:>11} {:>11.3e} {:>14}{}\n",
                b.branch,
                pm(&m.evm_percent),
                pm(&m.q_i_db),
                pm(&m.q_q_db),
                format_log10(m.ber_estimated_log10),
                m.ber_counted,
                format!("{}/{}", m.bit_errors, m.n_bits),
                if m.q_capped { "  (Q capped)" } else { "" }
            );
        }
        out
    }
}

/// `1.234e-567` from a base-10 logarithm, for values below f64 range.
fn format_log10(l: f64) -> String {
    if !l.is_finite() {
        return format!("{}", 10f64.powf(l));
    }
    let e = l.floor();
    let mut m = 10f64.powf(l - e);
    let mut e = e as i64;
    if format!("{m:.3}") == "10.000" {
        m = 1.0;
        e += 1;
    }
    format!("{m:.3}e{e}")
}

/// Runs scenarios, reusing modulator calibrations between runs that share
/// a device, comb and grid.
#[derive(Debug, Default)]
pub struct Runner {
    calibrations: HashMap<String, CombCalibration>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ReportBundle> {
    Runner::default().run(scenario)
}

/// Per-purpose generator: stream 0 is the noise, 1..=N the branch bits.
fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

impl Runner {
    pub fn run(&mut self, scenario: &Scenario) -> Result<ReportBundle> {
        scenario.validate()?;
        match scenario.mode {
            Mode::Transmission => self.transmission(scenario),
            Mode::Comb => self.comb_only(scenario),
        }
    }

    fn calibration(
        &mut self,
        lines: usize,
        spacing: f64,
        device: &MzmParams,
        options: &CalibrationOptions,
        grid: &TimeGrid,
    ) -> Result<CombCalibration> {
        let key = format!("{lines}|{spacing:e}|{device:?}|{options:?}|{grid:?}");
        if let Some(c) = self.calibrations.get(&key) {
            return Ok(c.clone());
        }
        let cal = calibrate_flat_comb(lines, spacing, device, options, grid)?;
        self.calibrations.insert(key, cal.clone());
        Ok(cal)
    }

    fn comb_only(&mut self, s: &Scenario) -> Result<ReportBundle> {
        let (device, calibration) = (&s.sampler.device, &s.sampler.calibration);
        let c = s.comb;
        let spacing = c.spacing_ghz * 1e9;
        let grid = TimeGrid::periodic(1.0 / spacing, 1, c.samples_per_period)?;
        let cal = self.calibration(c.lines, spacing, device, calibration, &grid)?;
        let cw = Signal::constant(grid, Complex64::new(dbm_to_mw(s.launch_power_dbm).sqrt(), 0.0));
        let out = modulate(&cw, &cal.plan, device)?;
        let transfer = modulate(&Signal::constant(grid, Complex64::new(1.0, 0.0)), &cal.plan, device)?
            .scale(1.0 / cal.field_scale);
        let ideal = sinc_sequence(&SincSequenceSpec::new(c.lines, c.lines as f64 * spacing, 0.0)?, &grid)?;
        let rmse = rmse_percent(&transfer, &ideal)?;
        Ok(ReportBundle {
            scenario: s.clone(),
            noise_seed: 0,
            sample_rate: grid.sample_rate,
            n_samples: grid.n_samples,
            branches: Vec::new(),
            comb: Some(CombSummary {
                calibration: cal,
                rmse_percent: rmse,
            }),
            traces: Traces {
                comb_spectrum: Some(spectrum(&out)),
                comb_waveform: Some((transfer, ideal)),
                ..Traces::default()
            },
        })
    }

    fn sampler(&mut self, s: &Scenario, grid: &TimeGrid) -> Result<Sampler> {
        let c = &s.sampler;
        Ok(match c.kind {
            SamplerKind::Ideal => Sampler::Ideal,
            SamplerKind::Mzm => {
                let n = s.n_branches;
                let cal = self.calibration(n, s.aggregate_bandwidth() / n as f64, &c.device, &c.calibration, grid)?;
                Sampler::Mzm(MzmSampler::from_calibration(&cal, c.device)?)
            }
        })
    }

    fn transmission(&mut self, s: &Scenario) -> Result<ReportBundle> {
        let grid = s.grid()?;
        let n = s.n_branches;
        let b = s.aggregate_bandwidth();
        let rate = s.branch_symbol_rate();
        let m = s.symbols_per_branch;
        let constellation = s.constellation();

        let mut tx_bits = Vec::with_capacity(n);
        let mut tx_symbols = Vec::with_capacity(n);
        let mut shaped = Vec::with_capacity(n);
        for l in 1..=n {
            let mut rng = rng_for(s.seed, l as u64);
            let bits: Vec<bool> = (0..m * constellation.bits_per_symbol()).map(|_| rng.random()).collect();
            let stream = qam_map(&bits, &constellation, rate)?.with_offset((l - 1) as f64 / b);
            shaped.push(raised_cosine_shape(&stream, s.rolloff, &grid)?);
            tx_symbols.push(stream.symbols);
            tx_bits.push(bits);
        }
        let mux = otdm_multiplex_signals(&shaped, &s.plan(1)?, &grid)?;
        let amplitude = dbm_to_mw(s.launch_power_dbm).sqrt() * 10f64.powf(-s.carrier_loss_db / 20.0);
        let mut x = normalize(&mux)?.scale(Complex64::new(amplitude, 0.0));

        let mut seeds = rng_for(s.seed, 0);
        let noise_seed = seeds.next_u64();
        let phase_seed = seeds.next_u64();
        if s.noise.linewidth_hz > 0.0 {
            x = add_phase_noise(&x, s.noise.linewidth_hz, phase_seed)?;
        }
        let fiber = s.fiber_spec();
        x = propagate(&x, &fiber)?;
        if let Some(osnr_db) = s.noise.osnr_db {
            let spec = NoiseSpec {
                osnr_db,
                reference_bandwidth: s.noise.reference_bandwidth_ghz * 1e9,
                seed: noise_seed,
            };
            x = add_noise(&x, &spec)?;
        }
        x = match s.compensation {
            Compensation::None => x,
            Compensation::Full => compensate_dispersion(&x, &fiber)?,
            Compensation::WrongSign => propagate(
                &x,
                &FiberSpec {
                    attenuation: 0.0,
                    ..fiber
                },
            )?,
        };

        let sampler = self.sampler(s, &grid)?;
        let sps = s.samples_per_symbol();
        let mut branches = Vec::with_capacity(n);
        let mut traces = Traces {
            spectrum_before: s.outputs.spectra.then(|| spectrum(&x)),
            ..Traces::default()
        };
        for l in 1..=n {
            let plan = s.plan(l)?;
            let sampled = sample_with_sequence(&x, &plan, &sampler)?;
            let filtered = brickwall_lowpass(&sampled, plan.detection_bandwidth())?.scale(Complex64::new(n as f64, 0.0));
            let detected = coherent_detect(&filtered, s.receiver.lo_power_mw, s.receiver.lo_phase_rad)?;
            let offset = plan.sampling_offset();
            let raw = sample_at(&detected, (0..m).map(|k| offset + k as f64 / rate))?;
            let reference = &tx_symbols[l - 1];
            let gain = fit_gain(&raw, reference)?;
            let rx: Vec<Complex64> = raw.iter().map(|v| v / gain).collect();
            let metrics = measure(&rx, reference, &tx_bits[l - 1], &constellation, s.metric_blocks)?;

            let mut trace = BranchTrace::default();
            if s.outputs.spectra {
                trace.spectrum_after = Some(spectrum(&sampled));
            }
            if s.outputs.constellation {
                trace.constellation = rx.iter().map(|&v| (v, constellation.decide(v))).collect();
            }
            if s.outputs.eye {
                let count = (s.outputs.eye_symbols.min(m) * sps).min(grid.n_samples);
                trace.eye = (0..count)
                    .map(|i| {
                        let tau = ((grid.time(i) - offset) * rate).rem_euclid(2.0);
                        (tau, (detected.samples()[i] / gain).re)
                    })
                    .collect();
            }
            traces.branches.push(trace);
            branches.push(BranchReport {
                branch: l,
                symbol_rate: rate,
                receiver_gain: gain,
                metrics,
            });
        }
        Ok(ReportBundle {
            scenario: s.clone(),
            noise_seed,
            sample_rate: grid.sample_rate,
            n_samples: grid.n_samples,
            branches,
            comb: None,
            traces,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_formatting() {
        assert_eq!(format_log10(-3.0), "1.000e-3");
        assert_eq!(format_log10((2.5e-7f64).log10()), "2.500e-7");
        assert_eq!(format_log10(-412.5), "3.162e-413");
        assert_eq!(format_log10(-0.0000001), "1.000e0");
    }
}
