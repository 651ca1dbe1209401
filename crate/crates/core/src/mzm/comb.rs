use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nyquist::check_odd_lines;
use crate::signal::{mw_to_dbm, Spectrum, GRID_TOLERANCE};

/// Lines weaker than this are reported at this level so every field stays
/// finite.
pub const LINE_FLOOR_DBM: f64 = -300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombReport {
    pub n_lines: usize,
    pub spacing: f64,
    /// max − min over the nominal lines, dB.
    pub flatness_db: f64,
    /// Weakest nominal line minus strongest unwanted sideband, dB.
    pub sideband_suppression_db: f64,
    /// Nominal line powers from `−(N−1)/2` to `(N−1)/2`, dBm.
    pub line_powers_dbm: Vec<f64>,
    /// Sidebands at `±(N+1)/2` and `±(N+3)/2`, ordered by index, dBm.
    pub unwanted_powers_dbm: Vec<f64>,
}

impl CombReport {
    /// Signed line indices matching `line_powers_dbm`.
    pub fn nominal_indices(&self) -> impl Iterator<Item = i64> {
        let half = (self.n_lines / 2) as i64;
        -half..=half
    }

    pub fn unwanted_indices(&self) -> Vec<i64> {
        unwanted_indices(self.n_lines)
    }
}

fn unwanted_indices(n_lines: usize) -> Vec<i64> {
    let inner = n_lines.div_ceil(2) as i64;
    let outer = ((n_lines + 3) / 2) as i64;
    vec![-outer, -inner, inner, outer]
}

fn line_power_dbm(spec: &Spectrum, freq: f64) -> Result<f64> {
    let nyquist = spec.grid().nyquist();
    if freq.abs() >= nyquist {
        return Err(Error::AboveNyquist {
            freq_hz: freq.abs(),
            nyquist_hz: nyquist,
        });
    }
    let i = spec.index_of(freq).ok_or(Error::OffGrid { freq_hz: freq })?;
    Ok(mw_to_dbm(spec.bins[i].norm_sqr()).max(LINE_FLOOR_DBM))
}

/// Reads an `N`-line comb centred on 0 Hz straight from the spectrum bins.
pub fn comb_report(spec: &Spectrum, n_lines: usize, spacing: f64) -> Result<CombReport> {
    check_odd_lines(n_lines)?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(invalid("spacing", "must be positive"));
    }
    let ratio = spacing / spec.freq_resolution;
    if (ratio - ratio.round()).abs() > GRID_TOLERANCE || ratio.round() < 1.0 {
        return Err(Error::OffGrid { freq_hz: spacing });
    }
    let half = (n_lines / 2) as i64;
    let line_powers_dbm = (-half..=half)
        .map(|k| line_power_dbm(spec, k as f64 * spacing))
        .collect::<Result<Vec<_>>>()?;
    let unwanted_powers_dbm = unwanted_indices(n_lines)
        .into_iter()
        .map(|k| line_power_dbm(spec, k as f64 * spacing))
        .collect::<Result<Vec<_>>>()?;

    let max = line_powers_dbm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = line_powers_dbm.iter().cloned().fold(f64::INFINITY, f64::min);
    let unwanted_max = unwanted_powers_dbm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CombReport {
        n_lines,
        spacing,
        flatness_db: max - min,
        sideband_suppression_db: min - unwanted_max,
        line_powers_dbm,
        unwanted_powers_dbm,
    })
}
