//! Flat-comb calibration of a dual-drive MZM.
//!
//! The plan is parametrised by a common modulation depth `s` (the effective
//! phase index of the fundamental tone), the bias difference, an arm
//! amplitude imbalance, the fundamental's phase and, for `N > 3`, the
//! relative index and phase of every higher tone. For each depth the trims
//! are fitted so the comb lines match a common complex value and everything
//! else vanishes.
//!
//! A deeper drive puts more light into the comb but raises the unwanted
//! sidebands, so the depth is pushed up to the preferred suppression. With
//! unequal arms the residual also has an interior minimum, and the depth is
//! never set below it.
//!
//! Unequal arm amplitudes leave the carrier slightly out of phase with the
//! sidebands, an error that shrinks as `1/s`, while the unwanted sidebands
//! grow as `s²`. The arm trim
//! gives up a little sideband suppression for a better phase match.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::search::compass_search;
use super::{comb_report, eo_response, modulate, CombReport, DrivePlan, DriveTone, MzmParams, Transfer};
use crate::error::{invalid, Result};
use crate::nyquist::check_odd_lines;
use crate::signal::{fft_scaled, spectrum, Signal, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationOptions {
    pub flatness_target_db: f64,
    /// Minimum distance between the weakest comb line and the strongest
    /// unwanted sideband.
    pub suppression_floor_db: f64,
    /// Preferred sideband suppression. The drive goes as deep as this
    /// allows, and deeper only while the line error keeps falling.
    pub suppression_target_db: f64,
    /// Evaluation budget of each local refinement.
    pub max_evaluations: usize,
    /// Points in the depth scan.
    pub depth_steps: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            flatness_target_db: 0.1,
            suppression_floor_db: 20.0,
            suppression_target_db: 40.0,
            max_evaluations: 4000,
            depth_steps: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombCalibration {
    pub plan: DrivePlan,
    pub report: CombReport,
    pub converged: bool,
    /// `N` times the mean complex amplitude of the nominal lines. Dividing
    /// the modulator transfer by it leaves a unit-peak sinc sequence.
    pub field_scale: Complex64,
    /// Effective phase index of the fundamental tone.
    pub modulation_index: f64,
    /// Normalised squared line error of the final plan.
    pub line_error: f64,
    pub evaluations: usize,
}

impl CombCalibration {
    pub fn table(&self) -> String {
        let r = &self.report;
        let mut out = String::new();
        let _ = writeln!(out, "{:>6} {:>14} {:>12}", "line", "offset_GHz", "power_dBm");
        for (k, p) in r.nominal_indices().zip(&r.line_powers_dbm) {
            let _ = writeln!(out, "{:>6} {:>14.3} {:>12.3}", k, k as f64 * r.spacing / 1e9, p);
        }
        for (k, p) in r.unwanted_indices().iter().zip(&r.unwanted_powers_dbm) {
            let _ = writeln!(out, "{:>6} {:>14.3} {:>12.3}  unwanted", k, *k as f64 * r.spacing / 1e9, p);
        }
        let _ = writeln!(out, "flatness_dB            {:.4}", r.flatness_db);
        let _ = writeln!(out, "sideband_suppression_dB {:.2}", r.sideband_suppression_db);
        let _ = writeln!(out, "modulation_index       {:.4}", self.modulation_index);
        let _ = writeln!(out, "converged              {}", self.converged);
        out
    }
}

const MODEL_SAMPLES: usize = 256;
const DEPTH_MIN: f64 = 0.01;
const DEPTH_MAX: f64 = 2.4;
const DEPTH_REFINEMENTS: usize = 16;
const KAPPA_MAX: f64 = 0.5;

struct Layout {
    n_lines: usize,
    spacing: f64,
    params: MzmParams,
    gains: Vec<f64>,
}

#[derive(Clone)]
struct Candidate {
    depth: f64,
    x: Vec<f64>,
    error: f64,
    flatness_db: f64,
    suppression_db: f64,
}

impl Layout {
    fn n_tones(&self) -> usize {
        self.n_lines / 2
    }

    /// `[Δ, κ, θ₁, (w_j, θ_j) for j ≥ 2]`
    fn initial(&self) -> Vec<f64> {
        let mut x = vec![PI / 2.0, 0.0, PI / 2.0];
        for _ in 1..self.n_tones() {
            x.extend([0.5, PI / 2.0]);
        }
        x
    }

    fn steps(&self) -> Vec<f64> {
        let mut s = vec![0.2, 0.01, 0.1];
        for _ in 1..self.n_tones() {
            s.extend([0.1, 0.2]);
        }
        s
    }

    fn plan(&self, depth: f64, x: &[f64]) -> DrivePlan {
        let (delta, kappa) = (x[0], x[1]);
        let tones = (1..=self.n_tones())
            .map(|j| {
                let (w, theta) = if j == 1 { (1.0, x[2]) } else { (x[2 * j - 1], x[2 * j]) };
                let amplitude = depth * w * self.params.v_pi / (PI * self.gains[j - 1]);
                DriveTone {
                    frequency: j as f64 * self.spacing,
                    amplitude_arm1: amplitude * (1.0 + kappa),
                    amplitude_arm2: amplitude * (1.0 - kappa),
                    phase_arm1: theta,
                    phase_arm2: theta + PI,
                }
            })
            .collect();
        DrivePlan {
            tones,
            bias_arm1: 0.5 * delta,
            bias_arm2: -0.5 * delta,
        }
    }

    /// Line amplitudes over one period, raw DFT order.
    fn lines(&self, plan: &DrivePlan) -> Vec<Complex64> {
        let transfer = Transfer::new(plan, &self.params);
        let dt = 1.0 / (self.spacing * MODEL_SAMPLES as f64);
        let samples: Vec<Complex64> = (0..MODEL_SAMPLES).map(|i| transfer.at(i as f64 * dt)).collect();
        fft_scaled(&samples)
    }

    fn line(c: &[Complex64], k: i64) -> Complex64 {
        c[k.rem_euclid(c.len() as i64) as usize]
    }

    fn error(&self, c: &[Complex64]) -> f64 {
        let half = self.n_tones() as i64;
        let n = self.n_lines as f64;
        let alpha = (-half..=half).map(|k| Self::line(c, k)).sum::<Complex64>() / n;
        let norm = n * alpha.norm_sqr();
        if norm < 1e-30 {
            return f64::INFINITY;
        }
        let total: f64 = c.iter().map(|v| v.norm_sqr()).sum();
        let nominal: f64 = (-half..=half).map(|k| Self::line(c, k).norm_sqr()).sum();
        let deviation: f64 = (-half..=half).map(|k| (Self::line(c, k) - alpha).norm_sqr()).sum();
        (deviation + (total - nominal).max(0.0)) / norm
    }

    fn quality(&self, c: &[Complex64]) -> (f64, f64) {
        let half = self.n_tones() as i64;
        let p: Vec<f64> = (-half..=half).map(|k| Self::line(c, k).norm_sqr()).collect();
        let max = p.iter().cloned().fold(0.0, f64::max);
        let min = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let unwanted = [half + 1, half + 2]
            .iter()
            .flat_map(|&k| [k, -k])
            .map(|k| Self::line(c, k).norm_sqr())
            .fold(1e-300, f64::max);
        (10.0 * (max / min).log10(), 10.0 * (min / unwanted).log10())
    }

    fn objective(&self, depth: f64, x: &[f64]) -> f64 {
        if x[1].abs() > KAPPA_MAX {
            return f64::INFINITY;
        }
        self.error(&self.lines(&self.plan(depth, x)))
    }

    fn best_bias(&self, depth: f64, x: &[f64]) -> Vec<f64> {
        let mut best = (f64::INFINITY, x.to_vec());
        for i in 0..96 {
            let mut trial = x.to_vec();
            trial[0] = -PI + (i as f64 + 0.5) * 2.0 * PI / 96.0;
            let e = self.objective(depth, &trial);
            if e < best.0 {
                best = (e, trial);
            }
        }
        best.1
    }

    /// Fits the trims at a fixed depth, from `warm` and from the default
    /// start, and keeps the better fit.
    fn refine(&self, depth: f64, warm: &[f64], budget: usize, evaluations: &mut usize) -> Candidate {
        let r = [warm.to_vec(), self.initial()]
            .into_iter()
            .map(|x| {
                let start = self.best_bias(depth, &x);
                let r = compass_search(|x| self.objective(depth, x), start, self.steps(), 1e-7, budget);
                *evaluations += r.evaluations + 96;
                r
            })
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("two starts");
        let (flatness_db, suppression_db) = self.quality(&self.lines(&self.plan(depth, &r.x)));
        Candidate {
            depth,
            x: r.x,
            error: r.value,
            flatness_db,
            suppression_db,
        }
    }
}

/// Finds a drive plan whose CW output is a flat `n_lines` comb spaced by
/// `spacing` and evaluates it on `grid`.
///
/// Among depths that meet the flatness target and the suppression floor,
/// the deeper of the line-error minimum and the deepest drive that still
/// meets the preferred suppression wins. When none qualifies the smallest
/// error overall is returned with `converged` false.
pub fn calibrate_flat_comb(
    n_lines: usize,
    spacing: f64,
    params: &MzmParams,
    options: &CalibrationOptions,
    grid: &TimeGrid,
) -> Result<CombCalibration> {
    check_odd_lines(n_lines)?;
    params.validate()?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(invalid("spacing", "must be positive"));
    }
    if n_lines as f64 * spacing >= grid.nyquist() {
        return Err(invalid(
            "spacing",
            format!("comb width {:e} Hz must stay below the grid Nyquist limit", n_lines as f64 * spacing),
        ));
    }
    if !(options.flatness_target_db > 0.0) || options.depth_steps < 2 || options.max_evaluations == 0 {
        return Err(invalid("options", "flatness target, depth steps and budget must be positive"));
    }
    grid.whole_periods(1.0 / spacing)?;

    let layout = Layout {
        n_lines,
        spacing,
        params: *params,
        gains: (1..=n_lines / 2).map(|j| eo_response(j as f64 * spacing, params)).collect(),
    };
    let feasible = |c: &Candidate| {
        c.flatness_db <= options.flatness_target_db && c.suppression_db >= options.suppression_floor_db
    };

    let mut evaluations = 0;
    let mut warm = layout.initial();
    let mut scan = Vec::with_capacity(options.depth_steps);
    let ratio = (DEPTH_MAX / DEPTH_MIN).powf(1.0 / (options.depth_steps - 1) as f64);
    for i in 0..options.depth_steps {
        let depth = DEPTH_MIN * ratio.powi(i as i32);
        let c = layout.refine(depth, &warm, options.max_evaluations, &mut evaluations);
        warm = c.x.clone();
        scan.push(c);
    }

    let score = |c: &Candidate| if feasible(c) { c.error } else { f64::INFINITY };
    let best = (0..scan.len())
        .min_by(|&a, &b| score(&scan[a]).total_cmp(&score(&scan[b])))
        .expect("depth scan is not empty");
    let preferred = |c: &Candidate| feasible(c) && c.suppression_db >= options.suppression_target_db;
    let deepest = scan.iter().rposition(preferred);
    let chosen = match deepest {
        _ if !score(&scan[best]).is_finite() => scan
            .iter()
            .min_by(|a, b| a.error.total_cmp(&b.error))
            .cloned()
            .expect("depth scan is not empty"),
        Some(i) if i > best => {
            // bisect towards the preferred-suppression boundary
            let mut lo = scan[i].clone();
            if let Some(next) = scan.get(i + 1) {
                let mut hi = next.depth;
                for _ in 0..DEPTH_REFINEMENTS {
                    let mid = (lo.depth * hi).sqrt();
                    let c = layout.refine(mid, &lo.x, options.max_evaluations, &mut evaluations);
                    if preferred(&c) {
                        lo = c;
                    } else {
                        hi = mid;
                    }
                }
            }
            lo
        }
        _ => {
            // golden-section search in log depth between the scan neighbours
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut champion = scan[best].clone();
            let mut probe = |u: f64| {
                let c = layout.refine(u.exp(), &scan[best].x, options.max_evaluations, &mut evaluations);
                let v = score(&c);
                if v < score(&champion) {
                    champion = c;
                }
                v
            };
            let mut a = scan[best.saturating_sub(1)].depth.ln();
            let mut b = scan[(best + 1).min(scan.len() - 1)].depth.ln();
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = probe(c);
            let mut fd = probe(d);
            for _ in 0..DEPTH_REFINEMENTS {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = probe(c);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = probe(d);
                }
            }
            champion
        }
    };

    let plan = layout.plan(chosen.depth, &chosen.x);
    let cw = Signal::constant(*grid, Complex64::new(1.0, 0.0));
    let sp = spectrum(&modulate(&cw, &plan, params)?);
    let report = comb_report(&sp, n_lines, spacing)?;
    let half = (n_lines / 2) as i64;
    let field_scale: Complex64 = (-half..=half)
        .map(|k| sp.bins[sp.index_of(k as f64 * spacing).expect("line checked by comb_report")])
        .sum();
    let converged = report.flatness_db <= options.flatness_target_db
        && report.sideband_suppression_db >= options.suppression_floor_db;
    Ok(CombCalibration {
        plan,
        report,
        converged,
        field_scale,
        modulation_index: chosen.depth,
        line_error: chosen.error,
        evaluations,
    })
}
