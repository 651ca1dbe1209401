//! Sampled complex field envelopes and the spectral algebra built on them.
//!
//! Field samples are in √mW, so `|x|²` is a power in mW and a constant
//! envelope of amplitude 1 sits at 0 dBm. Spectra use amplitude scaling
//! (`bins = DFT / n`): a tone `A·exp(j2πf₀t)` on the bin grid shows up as a
//! single bin of magnitude `|A|`, and Parseval reads
//! `Σ|bins|² = mean(|samples|²)`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Relative tolerance used when checking that a window holds an integer
/// number of periods, or that a frequency lands on a bin.
pub const GRID_TOLERANCE: f64 = 1e-6;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Uniform sampling grid `t_i = t0 + i / sample_rate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub sample_rate: f64,
    pub n_samples: usize,
    pub t0: f64,
}

impl TimeGrid {
    pub fn new(sample_rate: f64, n_samples: usize, t0: f64) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(invalid("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if n_samples == 0 {
            return Err(invalid("n_samples", "must be positive"));
        }
        if !t0.is_finite() {
            return Err(invalid("t0", "must be finite"));
        }
        Ok(Self {
            sample_rate,
            n_samples,
            t0,
        })
    }

    /// Grid that spans exactly `periods` repetitions of `period` seconds with
    /// `samples_per_period` samples each.
    pub fn periodic(period: f64, periods: usize, samples_per_period: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(invalid("period", "must be positive"));
        }
        if periods == 0 || samples_per_period == 0 {
            return Err(invalid("periods", "must be positive"));
        }
        Self::new(samples_per_period as f64 / period, periods * samples_per_period, 0.0)
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(move |i| self.time(i))
    }

    pub fn nyquist(&self) -> f64 {
        0.5 * self.sample_rate
    }

    /// Spacing of the DFT bins over this window.
    pub fn freq_resolution(&self) -> f64 {
        self.sample_rate / self.n_samples as f64
    }

    /// Number of whole periods of `period` in the window, or an error when
    /// the window is not an integer multiple of it.
    pub fn whole_periods(&self, period: f64) -> Result<usize> {
        let window = self.duration();
        let ratio = window / period;
        let rounded = ratio.round();
        if rounded < 1.0 || (ratio - rounded).abs() > GRID_TOLERANCE * ratio.max(1.0) {
            return Err(Error::NonIntegerPeriods {
                window_s: window,
                period_s: period,
            });
        }
        Ok(rounded as usize)
    }

    /// Index of the sample at time `t`, if `t` falls on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let pos = (t - self.t0) * self.sample_rate;
        let idx = pos.round();
        if (pos - idx).abs() > GRID_TOLERANCE || idx < 0.0 || idx >= self.n_samples as f64 {
            return None;
        }
        Some(idx as usize)
    }

    /// Signed frequency index of raw DFT output position `j`.
    pub(crate) fn signed_bin(&self, j: usize) -> i64 {
        let n = self.n_samples;
        if j < n - n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }
}

/// Complex field envelope sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: TimeGrid,
    samples: Vec<Complex64>,
}

impl Signal {
    pub fn new(grid: TimeGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::LengthMismatch {
                expected: grid.n_samples,
                actual: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            samples: vec![Complex64::new(0.0, 0.0); grid.n_samples],
        }
    }

    /// Samples `f(t)` at every grid instant.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let samples = grid.times().map(f).collect();
        Self { grid, samples }
    }

    pub fn constant(grid: TimeGrid, value: Complex64) -> Self {
        Self {
            grid,
            samples: vec![value; grid.n_samples],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power in mW.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, factor: Complex64) -> Signal {
        self.map(|x| x * factor)
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Signal {
        Signal {
            grid: self.grid,
            samples: self.samples.iter().map(|&x| f(x)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Signal,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Signal> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Signal {
            grid: self.grid,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Sample-wise product, the time-domain form of spectral convolution.
    pub fn mul(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a * b)
    }
}

/// Amplitude spectrum of a [`Signal`], ordered from the most negative
/// frequency to the most positive with the carrier (f = 0) in the middle.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub freq_resolution: f64,
    pub bins: Vec<Complex64>,
    grid: TimeGrid,
}

impl Spectrum {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Signed bin index of `bins[0]`.
    pub fn first_bin(&self) -> i64 {
        -((self.bins.len() / 2) as i64)
    }

    pub fn frequency(&self, i: usize) -> f64 {
        (self.first_bin() + i as i64) as f64 * self.freq_resolution
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins.len()).map(move |i| self.frequency(i))
    }

    /// Position in `bins` of the bin exactly at `freq`, or `None` when `freq`
    /// is off the bin grid or outside the spectrum.
    pub fn index_of(&self, freq: f64) -> Option<usize> {
        let pos = freq / self.freq_resolution;
        let k = pos.round();
        if (pos - k).abs() > GRID_TOLERANCE {
            return None;
        }
        let i = k as i64 - self.first_bin();
        if i < 0 || i >= self.bins.len() as i64 {
            return None;
        }
        Some(i as usize)
    }

    /// Total power, equal to the mean power of the source signal.
    pub fn power(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum()
    }

    /// Per-bin power in dBm.
    pub fn power_dbm(&self) -> Vec<f64> {
        self.bins.iter().map(|b| mw_to_dbm(b.norm_sqr())).collect()
    }
}

/// DFT scaled by `1/n`, raw (unshifted) order.
pub(crate) fn fft_scaled(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf = x.to_vec();
    forward_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Unscaled inverse DFT of raw-order coefficients.
pub(crate) fn ifft_unscaled(mut buf: Vec<Complex64>) -> Vec<Complex64> {
    let n = buf.len();
    inverse_plan(n).process(&mut buf);
    buf
}

/// Forward transform of a signal.
pub fn spectrum(sig: &Signal) -> Spectrum {
    let n = sig.len();
    let mut buf = sig.samples.clone();
    forward_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let first = -((n / 2) as i64);
    let bins = (0..n)
        .map(|i| {
            let k = first + i as i64;
            buf[k.rem_euclid(n as i64) as usize] * scale
        })
        .collect();
    Spectrum {
        freq_resolution: sig.grid.freq_resolution(),
        bins,
        grid: sig.grid,
    }
}

/// Inverse of [`spectrum`].
pub fn inverse_spectrum(spec: &Spectrum) -> Signal {
    let n = spec.bins.len();
    let first = spec.first_bin();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (i, &b) in spec.bins.iter().enumerate() {
        let k = first + i as i64;
        buf[k.rem_euclid(n as i64) as usize] = b;
    }
    inverse_plan(n).process(&mut buf);
    Signal {
        grid: spec.grid,
        samples: buf,
    }
}

/// Multiplies the spectrum of `sig` by `response(f)` and transforms back.
/// Every operator that is diagonal in frequency goes through here.
pub fn apply_response(sig: &Signal, response: impl Fn(f64) -> Complex64) -> Signal {
    let n = sig.len();
    let df = sig.grid.freq_resolution();
    let mut buf = sig.samples.clone();
    forward_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for (j, x) in buf.iter_mut().enumerate() {
        let f = sig.grid.signed_bin(j) as f64 * df;
        *x *= response(f) * scale;
    }
    inverse_plan(n).process(&mut buf);
    Signal {
        grid: sig.grid,
        samples: buf,
    }
}

/// Rectangular low-pass: bins with `|f| < half_width` pass, a bin exactly at
/// `|f| = half_width` is halved, everything else is removed.
pub fn brickwall_lowpass(sig: &Signal, half_width: f64) -> Result<Signal> {
    let nyquist = sig.grid.nyquist();
    if !(half_width.is_finite() && half_width >= 0.0) {
        return Err(invalid("half_width", "must be non-negative"));
    }
    if half_width >= nyquist {
        return Err(Error::AboveNyquist {
            freq_hz: half_width,
            nyquist_hz: nyquist,
        });
    }
    let df = sig.grid.freq_resolution();
    let edge = half_width / df;
    Ok(apply_response(sig, move |f| {
        let k = (f / df).abs();
        let gain = if (k - edge).abs() <= GRID_TOLERANCE {
            0.5
        } else if k < edge {
            1.0
        } else {
            0.0
        };
        Complex64::new(gain, 0.0)
    }))
}

/// `100·√(mean|m − r|²) / max|r|`.
pub fn rmse_percent(measured: &Signal, reference: &Signal) -> Result<f64> {
    if measured.grid != reference.grid {
        return Err(Error::GridMismatch);
    }
    let peak = reference.peak();
    if peak == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let mse = measured
        .samples
        .iter()
        .zip(&reference.samples)
        .map(|(m, r)| (m - r).norm_sqr())
        .sum::<f64>()
        / measured.len() as f64;
    Ok(100.0 * mse.sqrt() / peak)
}

pub fn mw_to_dbm(p_mw: f64) -> f64 {
    10.0 * p_mw.log10()
}

pub fn dbm_to_mw(p_dbm: f64) -> f64 {
    10f64.powf(p_dbm / 10.0)
}

/// Mean power in dBm.
pub fn power_dbm(sig: &Signal) -> f64 {
    mw_to_dbm(sig.power())
}

/// Rescales to unit mean power (0 dBm).
pub fn normalize(sig: &Signal) -> Result<Signal> {
    let p = sig.power();
    if p == 0.0 || !p.is_finite() {
        return Err(Error::ZeroSignal);
    }
    Ok(sig.scale(Complex64::new(1.0 / p.sqrt(), 0.0)))
}

/// Least-squares complex gain `α` minimising `|measured − α·reference|`.
pub fn fit_gain(measured: &[Complex64], reference: &[Complex64]) -> Result<Complex64> {
    if measured.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: measured.len(),
        });
    }
    let den: f64 = reference.iter().map(|r| r.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::ZeroSignal);
    }
    let num: Complex64 = measured.iter().zip(reference).map(|(m, r)| m * r.conj()).sum();
    Ok(num / den)
}
