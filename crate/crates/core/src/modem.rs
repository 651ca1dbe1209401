//! QAM mapping and signal-quality metrics.
//!
//! Bit conventions: QPSK maps `[b0, b1]` to `((1 − 2b0) + j(1 − 2b1))/√2`, so
//! `00 → (1 + j)/√2`. 16-QAM maps `[I_sign, I_mag, Q_sign, Q_mag]` with the
//! per-axis Gray code `+1 = 00, +3 = 01, −1 = 10, −3 = 11`, scaled by `1/√10`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::nyquist::SymbolStream;

/// BER threshold of hard-decision FEC with 7 % overhead.
pub const HD_FEC_LIMIT: f64 = 4.5e-3;

/// Value reported for a quadrature whose clusters have no spread.
pub const Q_CAP_DB: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub format: Format,
    /// Indexed by label, the bits read MSB first.
    pub points: Vec<Complex64>,
}

fn axis_level(sign: usize, mag: usize) -> f64 {
    (1.0 - 2.0 * sign as f64) * (1.0 + 2.0 * mag as f64)
}

impl Constellation {
    pub fn new(format: Format) -> Self {
        let points = match format {
            Format::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                (0..4)
                    .map(|l| Complex64::new(axis_level(l >> 1, 0) * s, axis_level(l & 1, 0) * s))
                    .collect()
            }
            Format::Qam16 => {
                let s = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|l| {
                        Complex64::new(
                            axis_level((l >> 3) & 1, (l >> 2) & 1) * s,
                            axis_level((l >> 1) & 1, l & 1) * s,
                        )
                    })
                    .collect()
            }
        };
        Self { format, points }
    }

    pub fn qpsk() -> Self {
        Self::new(Format::Qpsk)
    }

    pub fn qam16() -> Self {
        Self::new(Format::Qam16)
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order().trailing_zeros() as usize
    }

    /// Label of the nearest point.
    pub fn decide(&self, x: Complex64) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (label, p) in self.points.iter().enumerate() {
            let d = (x - p).norm_sqr();
            if d < best.0 {
                best = (d, label);
            }
        }
        best.1
    }

    fn label_bits(&self, label: usize) -> impl Iterator<Item = bool> {
        let k = self.bits_per_symbol();
        (0..k).rev().map(move |i| (label >> i) & 1 == 1)
    }
}

pub fn qam_map(bits: &[bool], constellation: &Constellation, symbol_rate: f64) -> Result<SymbolStream> {
    let k = constellation.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(invalid(
            "bits",
            format!("{} bits do not fill whole {k}-bit symbols", bits.len()),
        ));
    }
    let symbols = bits
        .chunks(k)
        .map(|c| {
            let label = c.iter().fold(0, |acc, &b| (acc << 1) | b as usize);
            constellation.points[label]
        })
        .collect();
    SymbolStream::new(symbols, symbol_rate)
}

/// Minimum-distance decisions, returned as bits.
pub fn qam_demap(symbols: &[Complex64], constellation: &Constellation) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|&x| constellation.label_bits(constellation.decide(x)))
        .collect()
}

fn check_lengths(rx: &[Complex64], reference: &[Complex64]) -> Result<()> {
    if rx.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            actual: rx.len(),
        });
    }
    if rx.is_empty() {
        return Err(invalid("symbols", "empty"));
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn blocks(len: usize, count: usize) -> Vec<std::ops::Range<usize>> {
    let count = count.clamp(1, len);
    (0..count).map(|b| b * len / count..(b + 1) * len / count).collect()
}

/// RMS-referenced EVM of the whole record, in percent.
pub fn evm_percent(rx: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    check_lengths(rx, reference)?;
    let err: f64 = rx.iter().zip(reference).map(|(r, s)| (r - s).norm_sqr()).sum();
    let den: f64 = reference.iter().map(|s| s.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(100.0 * (err / den).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std: f64,
}

/// EVM as mean ± standard deviation over `n_blocks` equal blocks.
pub fn evm(rx: &[Complex64], reference: &[Complex64], n_blocks: usize) -> Result<Estimate> {
    check_lengths(rx, reference)?;
    let per_block = blocks(rx.len(), n_blocks)
        .into_iter()
        .map(|r| evm_percent(&rx[r.clone()], &reference[r]))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = mean_std(&per_block);
    Ok(Estimate { mean, std })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureQ {
    pub linear: f64,
    pub db: f64,
    /// Set when the clusters had no spread and `db` holds [`Q_CAP_DB`].
    pub capped: bool,
}

impl QuadratureQ {
    fn from_linear(q: f64) -> Self {
        if !q.is_finite() || q > 1e12 {
            let linear = 10f64.powf(Q_CAP_DB / 20.0);
            return Self {
                linear,
                db: Q_CAP_DB,
                capped: true,
            };
        }
        Self {
            linear: q,
            db: 20.0 * q.log10(),
            capped: false,
        }
    }
}

/// Decision-threshold Q of one quadrature: the worst adjacent level pair.
fn quadrature_q(rx: &[f64], reference: &[f64]) -> Result<QuadratureQ> {
    let mut levels: Vec<(f64, Vec<f64>)> = Vec::new();
    for (&r, &s) in rx.iter().zip(reference) {
        match levels.iter_mut().find(|(l, _)| (l - s).abs() < 1e-9) {
            Some((_, v)) => v.push(r),
            None => levels.push((s, vec![r])),
        }
    }
    if levels.len() < 2 {
        return Err(Error::Metric(format!(
            "a quadrature needs at least 2 occupied levels, found {}",
            levels.len()
        )));
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let stats: Vec<(f64, f64)> = levels.iter().map(|(_, v)| mean_std(v)).collect();
    let q = stats
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) / (w[1].1 + w[0].1))
        .fold(f64::INFINITY, f64::min);
    Ok(QuadratureQ::from_linear(q))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QFactor {
    pub i: QuadratureQ,
    pub q: QuadratureQ,
}

pub fn q_factor(rx: &[Complex64], reference: &[Complex64]) -> Result<QFactor> {
    check_lengths(rx, reference)?;
    let split = |v: &[Complex64], f: fn(&Complex64) -> f64| v.iter().map(f).collect::<Vec<f64>>();
    Ok(QFactor {
        i: quadrature_q(&split(rx, |c| c.re), &split(reference, |c| c.re))?,
        q: quadrature_q(&split(rx, |c| c.im), &split(reference, |c| c.im))?,
    })
}

/// `½·erfc(Q/√2)` for a linear Q. Non-positive Q gives 0.5.
pub fn ber_estimate(q_linear: f64) -> f64 {
    0.5 * erfc(q_linear.max(0.0) / std::f64::consts::SQRT_2)
}

/// `log10` of [`ber_estimate`], still finite where the linear value
/// underflows (Q above about 37).
pub fn log10_ber_estimate(q_linear: f64) -> f64 {
    let p = ber_estimate(q_linear);
    if p > 1e-280 {
        return p.log10();
    }
    // tail = φ(x)/t, with t the continued fraction x + 1/(x + 2/(x + ...))
    let x = q_linear;
    let mut t = x;
    for k in (1..=64).rev() {
        t = x + k as f64 / t;
    }
    (-0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln() - t.ln()) / std::f64::consts::LN_10
}

/// `log10(½(10^a + 10^b))`
fn log10_mean(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (0.5 * (1.0 + 10f64.powf(lo - hi))).log10()
}

pub fn db_to_linear_q(q_db: f64) -> f64 {
    10f64.powf(q_db / 20.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BerCount {
    pub errors: u64,
    pub bits: u64,
}

impl BerCount {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }

    pub fn error_free(&self) -> bool {
        self.errors == 0
    }
}

pub fn ber_count(tx: &[bool], rx: &[bool]) -> Result<BerCount> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    Ok(BerCount {
        errors: tx.iter().zip(rx).filter(|(a, b)| a != b).count() as u64,
        bits: tx.len() as u64,
    })
}

pub fn below_hd_fec(ber: f64) -> bool {
    ber <= HD_FEC_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub evm_percent: Estimate,
    pub q_i_db: Estimate,
    pub q_q_db: Estimate,
    /// True when either quadrature hit the noiseless cap.
    pub q_capped: bool,
    pub ber_estimated: f64,
    /// `log10(ber_estimated)`, computed without underflow.
    pub ber_estimated_log10: f64,
    pub ber_counted: f64,
    pub bit_errors: u64,
    pub n_bits: u64,
    pub below_hd_fec: bool,
}

/// Full metric set for one branch. `n_blocks` sets the ± spread of EVM and Q.
pub fn measure(
    rx: &[Complex64],
    reference: &[Complex64],
    tx_bits: &[bool],
    constellation: &Constellation,
    n_blocks: usize,
) -> Result<MetricsReport> {
    check_lengths(rx, reference)?;
    let evm_percent = evm(rx, reference, n_blocks)?;
    let whole = q_factor(rx, reference)?;
    let mut qi = Vec::new();
    let mut qq = Vec::new();
    for r in blocks(rx.len(), n_blocks) {
        // short blocks may miss a level; they just do not contribute
        if let Ok(q) = q_factor(&rx[r.clone()], &reference[r]) {
            qi.push(q.i.db);
            qq.push(q.q.db);
        }
    }
    let spread = |v: &[f64]| if v.is_empty() { 0.0 } else { mean_std(v).1 };
    let count = ber_count(tx_bits, &qam_demap(rx, constellation))?;
    let ber_estimated = 0.5 * (ber_estimate(whole.i.linear) + ber_estimate(whole.q.linear));
    Ok(MetricsReport {
        evm_percent,
        q_i_db: Estimate {
            mean: whole.i.db,
            std: spread(&qi),
        },
        q_q_db: Estimate {
            mean: whole.q.db,
            std: spread(&qq),
        },
        q_capped: whole.i.capped || whole.q.capped,
        ber_estimated,
        ber_estimated_log10: log10_mean(log10_ber_estimate(whole.i.linear), log10_ber_estimate(whole.q.linear)),
        ber_counted: count.rate(),
        bit_errors: count.errors,
        n_bits: count.bits,
        below_hd_fec: below_hd_fec(ber_estimated),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_convention() {
        let c = Constellation::qpsk();
        let s = qam_map(&[false, false], &c, 1.0).unwrap();
        let expect = Complex64::new(1.0, 1.0) / 2f64.sqrt();
        assert!((s.symbols[0] - expect).norm() < 1e-15);
        let s = qam_map(&[true, false], &c, 1.0).unwrap();
        assert!(s.symbols[0].re < 0.0 && s.symbols[0].im > 0.0);
    }

    #[test]
    fn unit_power_and_gray() {
        for c in [Constellation::qpsk(), Constellation::qam16()] {
            let p: f64 = c.points.iter().map(|x| x.norm_sqr()).sum::<f64>() / c.order() as f64;
            assert!((p - 1.0).abs() < 1e-12);
            let dmin = c
                .points
                .iter()
                .enumerate()
                .flat_map(|(i, a)| c.points[i + 1..].iter().map(move |b| (a - b).norm()))
                .fold(f64::INFINITY, f64::min);
            for (i, a) in c.points.iter().enumerate() {
                for (j, b) in c.points.iter().enumerate() {
                    if i != j && ((a - b).norm() - dmin).abs() < 1e-9 {
                        assert_eq!((i ^ j).count_ones(), 1, "{a} {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn qam16_levels() {
        let c = Constellation::qam16();
        let s = 1.0 / 10f64.sqrt();
        // [I_sign, I_mag, Q_sign, Q_mag] = 1 1 0 1 → (−3, +3)
        let x = qam_map(&[true, true, false, true], &c, 1.0).unwrap().symbols[0];
        assert!((x - Complex64::new(-3.0 * s, 3.0 * s)).norm() < 1e-12);
    }

    #[test]
    fn map_rejects_partial_symbol() {
        assert!(qam_map(&[true; 5], &Constellation::qam16(), 1.0).is_err());
    }

    #[test]
    fn evm_definition() {
        let c = Constellation::qam16();
        let reference: Vec<Complex64> = (0..160).map(|i| c.points[i % 16]).collect();
        assert_eq!(evm_percent(&reference, &reference).unwrap(), 0.0);
        let rx: Vec<Complex64> = reference
            .iter()
            .enumerate()
            .map(|(i, r)| r + Complex64::from_polar(0.1, i as f64))
            .collect();
        let e = evm(&rx, &reference, 10).unwrap();
        assert!((e.mean - 10.0).abs() < 1e-9);
        assert!(e.std < 1e-9);
        assert!(evm(&rx[1..], &reference, 10).is_err());
    }

    #[test]
    fn q_two_levels_eight_sigma() {
        // clusters at ±4σ built from exact ±1 offsets, so σ = 1 in each
        let mut rx = Vec::new();
        let mut reference = Vec::new();
        for k in 0..2000 {
            let d = if k % 2 == 0 { 1.0 } else { -1.0 };
            rx.push(Complex64::new(4.0 + d, 4.0 - d));
            reference.push(Complex64::new(1.0, 1.0));
            rx.push(Complex64::new(-4.0 + d, -4.0 - d));
            reference.push(Complex64::new(-1.0, -1.0));
        }
        let q = q_factor(&rx, &reference).unwrap();
        assert!((q.i.linear - 4.0).abs() < 1e-12);
        assert!((q.i.db - 12.041).abs() < 1e-3);
        assert!(!q.i.capped);
    }

    #[test]
    fn q_noiseless_capped() {
        let c = Constellation::qpsk();
        let reference: Vec<Complex64> = (0..40).map(|i| c.points[i % 4]).collect();
        let q = q_factor(&reference, &reference).unwrap();
        assert!(q.i.capped && q.q.capped);
        assert_eq!(q.i.db, Q_CAP_DB);
    }

    #[test]
    fn q_needs_two_levels() {
        let one = vec![Complex64::new(1.0, 1.0); 10];
        assert!(matches!(q_factor(&one, &one), Err(Error::Metric(_))));
    }

    #[test]
    fn ber_estimate_points() {
        assert!((ber_estimate(0.0) - 0.5).abs() < 1e-15);
        let b = ber_estimate(db_to_linear_q(18.46));
        assert!((1e-18..=1e-16).contains(&b), "{b}");
        let b = ber_estimate(7.03);
        assert!((b / 1.0e-12 - 1.0).abs() < 0.05, "{b}");
    }

    #[test]
    fn ber_counting() {
        let tx = vec![false; 300_000];
        let c = ber_count(&tx, &tx).unwrap();
        assert!(c.error_free());
        assert_eq!(c.bits, 300_000);
        let mut rx = vec![false; 100_000];
        rx[500] = true;
        assert_eq!(ber_count(&rx, &vec![false; 100_000]).unwrap().rate(), 1e-5);
        let flipped: Vec<bool> = tx.iter().map(|b| !b).collect();
        assert_eq!(ber_count(&tx, &flipped).unwrap().rate(), 1.0);
        assert!(ber_count(&tx, &tx[1..]).is_err());
    }

    #[test]
    fn hd_fec_boundary() {
        assert!(below_hd_fec(4.5e-3));
        assert!(!below_hd_fec(f64::from_bits(4.5e-3f64.to_bits() + 1)));
    }

    #[test]
    fn format_json_names() {
        assert_eq!(serde_json::to_string(&Format::Qam16).unwrap(), "\"16qam\"");
        assert_eq!(serde_json::from_str::<Format>("\"qpsk\"").unwrap(), Format::Qpsk);
    }
}
