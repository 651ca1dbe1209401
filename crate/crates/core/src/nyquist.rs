//! Sinc pulses, sinc-shaped pulse sequences and orthogonal time-domain
//! multiplexing of Nyquist channels.
//!
//! All waveforms are built on a finite window with periodised (circular)
//! kernels, so the window must hold a whole number of symbol periods and of
//! sinc-sequence periods. Inside such a window the kernels are exact
//! trigonometric polynomials: orthogonality holds to rounding error and
//! there is no truncation ripple.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::demux::ChannelPlan;
use crate::error::{invalid, Error, Result};
use crate::signal::{fft_scaled, ifft_unscaled, Signal, TimeGrid};

/// Sinc sequence `Σ_k sinc(B·(t − shift) − kN)`: a train of sinc pulses with
/// period `N/B` whose spectrum is `N` equal lines spaced `B/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SincSequenceSpec {
    pub n_lines: usize,
    pub bandwidth: f64,
    pub time_shift: f64,
}

impl SincSequenceSpec {
    pub fn new(n_lines: usize, bandwidth: f64, time_shift: f64) -> Result<Self> {
        check_odd_lines(n_lines)?;
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(invalid("bandwidth", "must be positive"));
        }
        if !time_shift.is_finite() {
            return Err(invalid("time_shift", "must be finite"));
        }
        Ok(Self {
            n_lines,
            bandwidth,
            time_shift,
        })
    }

    pub fn period(&self) -> f64 {
        self.n_lines as f64 / self.bandwidth
    }

    pub fn line_spacing(&self) -> f64 {
        self.bandwidth / self.n_lines as f64
    }

    /// Closed form via the line sum `(1/N)·(1 + 2 Σ_{m=1}^{(N-1)/2} cos(2π m B t / N))`.
    pub fn value_at(&self, t: f64) -> f64 {
        let x = 2.0 * PI * self.line_spacing() * (t - self.time_shift);
        let half = (self.n_lines - 1) / 2;
        let sum: f64 = (1..=half).map(|m| (m as f64 * x).cos()).sum();
        (1.0 + 2.0 * sum) / self.n_lines as f64
    }
}

pub(crate) fn check_odd_lines(n: usize) -> Result<()> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(invalid("n_lines", format!("must be odd and at least 3, got {n}")));
    }
    Ok(())
}

/// Evaluates a sinc sequence on `grid`. The window must span whole periods.
pub fn sinc_sequence(spec: &SincSequenceSpec, grid: &TimeGrid) -> Result<Signal> {
    grid.whole_periods(spec.period())?;
    Ok(Signal::from_fn(*grid, |t| Complex64::new(spec.value_at(t), 0.0)))
}

/// Complex symbols clocked at `symbol_rate`, symbol `k` sitting at
/// `offset + k / symbol_rate`.
///
/// JSON form: `{"symbol_rate": .., "offset": .., "symbols": [[re, im], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolStream {
    pub symbols: Vec<Complex64>,
    pub symbol_rate: f64,
    #[serde(default)]
    pub offset: f64,
}

impl SymbolStream {
    pub fn new(symbols: Vec<Complex64>, symbol_rate: f64) -> Result<Self> {
        if !(symbol_rate.is_finite() && symbol_rate > 0.0) {
            return Err(invalid("symbol_rate", "must be positive"));
        }
        Ok(Self {
            symbols,
            symbol_rate,
            offset: 0.0,
        })
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn instant(&self, k: usize) -> f64 {
        self.offset + k as f64 / self.symbol_rate
    }

    pub fn mean_power(&self) -> f64 {
        if self.symbols.is_empty() {
            return 0.0;
        }
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SymbolStream = serde_json::from_str(text)?;
        SymbolStream::new(s.symbols, s.symbol_rate).map(|x| x.with_offset(s.offset))
    }
}

/// Raised-cosine spectrum, frequency normalised to the symbol rate.
/// `rolloff = 0` gives the rectangle with the half-height edge at ±1/2.
fn raised_cosine(nu: f64, rolloff: f64) -> f64 {
    let a = nu.abs();
    if rolloff == 0.0 {
        return if (a - 0.5).abs() <= 1e-12 {
            0.5
        } else if a < 0.5 {
            1.0
        } else {
            0.0
        };
    }
    let lo = 0.5 * (1.0 - rolloff);
    let hi = 0.5 * (1.0 + rolloff);
    if a <= lo {
        1.0
    } else if a < hi {
        0.5 * (1.0 + (PI / rolloff * (a - lo)).cos())
    } else {
        0.0
    }
}

/// Circular pulse shaping: `Σ_k a_k·p(t − t_k)` where `p` is the periodised
/// kernel whose Fourier coefficients are `H(f)/M` on the window's bin grid.
fn shape_periodic(stream: &SymbolStream, grid: &TimeGrid, rolloff: f64) -> Result<Signal> {
    let m = stream.len();
    if m == 0 {
        return Err(invalid("symbols", "stream is empty"));
    }
    let rate = stream.symbol_rate;
    let window_symbols = grid.whole_periods(1.0 / rate)?;
    if window_symbols != m {
        return Err(invalid(
            "symbols",
            format!("window holds {window_symbols} symbol periods but the stream has {m} symbols"),
        ));
    }
    let fs = grid.sample_rate;
    if rolloff == 0.0 && fs <= rate {
        return Err(invalid("sample_rate", "must exceed the symbol rate"));
    }
    if fs < (1.0 + rolloff) * rate * (1.0 - 1e-12) {
        return Err(invalid(
            "sample_rate",
            format!("must be at least (1 + rolloff)·symbol_rate = {:e}", (1.0 + rolloff) * rate),
        ));
    }

    // coefficients A_r / M of the symbol sequence, raw DFT order
    let coeffs = fft_scaled(&stream.symbols);
    let df = grid.freq_resolution();
    let buf: Vec<Complex64> = (0..grid.n_samples)
        .map(|j| {
            let k = grid.signed_bin(j);
            let h = raised_cosine(k as f64 / m as f64, rolloff);
            if h == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let f = k as f64 * df;
            coeffs[k.rem_euclid(m as i64) as usize]
                * h
                * Complex64::from_polar(1.0, 2.0 * PI * f * (grid.t0 - stream.offset))
        })
        .collect();
    Signal::new(*grid, ifft_unscaled(buf))
}

/// Ideal Nyquist (sinc) interpolation of a symbol stream on `grid`.
pub fn nyquist_interpolate(stream: &SymbolStream, grid: &TimeGrid) -> Result<Signal> {
    shape_periodic(stream, grid, 0.0)
}

/// Raised-cosine pulse shaping with the given roll-off, ISI-free at the
/// symbol instants and confined to `±(1 + rolloff)·symbol_rate/2`.
pub fn raised_cosine_shape(stream: &SymbolStream, rolloff: f64, grid: &TimeGrid) -> Result<Signal> {
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(invalid("rolloff", format!("must be in [0, 1], got {rolloff}")));
    }
    shape_periodic(stream, grid, rolloff)
}

/// Sinc sequence of branch `l` (1-based): shifted by `(l − 1)/B`.
pub fn branch_sequence(plan: &ChannelPlan, branch: usize) -> Result<SincSequenceSpec> {
    if branch == 0 || branch > plan.n_branches {
        return Err(invalid("branch", format!("must be in 1..={}", plan.n_branches)));
    }
    SincSequenceSpec::new(
        plan.n_branches,
        plan.aggregate_bandwidth,
        (branch - 1) as f64 / plan.aggregate_bandwidth,
    )
}

/// Multiplexes already shaped branch waveforms: `Σ_l s_l(t)·sincseq(t − (l−1)/B)`.
/// The branch index in `plan` is not used.
pub fn otdm_multiplex_signals(branches: &[Signal], plan: &ChannelPlan, grid: &TimeGrid) -> Result<Signal> {
    if branches.len() != plan.n_branches {
        return Err(Error::LengthMismatch {
            expected: plan.n_branches,
            actual: branches.len(),
        });
    }
    let mut out = Signal::zeros(*grid);
    for (l, s) in branches.iter().enumerate() {
        if s.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let seq = sinc_sequence(&branch_sequence(plan, l + 1)?, grid)?;
        out = out.add(&s.mul(&seq)?)?;
    }
    Ok(out)
}

/// Orthogonal time-domain multiplexing of `N` symbol streams, each at `B/N`.
///
/// Channel `l` (1-based) is Nyquist-interpolated with its symbol `k` at
/// `kN/B + (l−1)/B + offset` and weighted by the branch sinc sequence. The
/// window must hold an odd number of symbols per channel.
pub fn otdm_multiplex(channels: &[SymbolStream], plan: &ChannelPlan, grid: &TimeGrid) -> Result<Signal> {
    if channels.len() != plan.n_branches {
        return Err(Error::LengthMismatch {
            expected: plan.n_branches,
            actual: channels.len(),
        });
    }
    let rate = plan.branch_symbol_rate();
    if let Some(ch) = channels.iter().find(|ch| ch.len() % 2 == 0) {
        // with an even count the periodised spectrum puts symbol energy on
        // the ±B/(2N) edge bin, which the demultiplexer can only half-pass
        return Err(invalid(
            "symbols",
            format!("each channel needs an odd symbol count per window, got {}", ch.len()),
        ));
    }
    let branches = channels
        .iter()
        .enumerate()
        .map(|(l, ch)| {
            if ((ch.symbol_rate - rate) / rate).abs() > 1e-9 {
                return Err(invalid(
                    "symbol_rate",
                    format!("channel {} runs at {:e} Bd, plan requires B/N = {:e} Bd", l + 1, ch.symbol_rate, rate),
                ));
            }
            let placed = ch.clone().with_offset(ch.offset + l as f64 / plan.aggregate_bandwidth);
            nyquist_interpolate(&placed, grid)
        })
        .collect::<Result<Vec<_>>>()?;
    otdm_multiplex_signals(&branches, plan, grid)
}

/// Interleaves `N` equal-length streams into one stream at `N`× the rate:
/// symbol `k` of channel `l` lands at position `kN + l − 1`.
pub fn interleave(channels: &[SymbolStream]) -> Result<SymbolStream> {
    let n = channels.len();
    let first = channels.first().ok_or_else(|| invalid("channels", "empty"))?;
    let m = first.len();
    let mut out = Vec::with_capacity(n * m);
    for ch in channels {
        if ch.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                actual: ch.len(),
            });
        }
    }
    for k in 0..m {
        for ch in channels {
            out.push(ch.symbols[k]);
        }
    }
    SymbolStream::new(out, first.symbol_rate * n as f64)
}
