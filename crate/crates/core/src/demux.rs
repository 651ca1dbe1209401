//! Orthogonal time-domain demultiplexing by sinc-sequence sampling.
//!
//! Each branch multiplies the incoming field by its own time-shifted sinc
//! sequence and keeps only the band `±B/(2N)`. What is left is `(1/N)·s_l(t)`;
//! the gain `N` is restored here so recovered symbols sit on the original
//! constellation scale.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mzm::{modulate, CombCalibration, DrivePlan, MzmParams};
use crate::nyquist::{branch_sequence, check_odd_lines, sinc_sequence, SincSequenceSpec};
use crate::signal::{brickwall_lowpass, Signal};

/// Channel layout plus the branch a receiver is tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub n_branches: usize,
    pub aggregate_bandwidth: f64,
    /// 1-based branch index.
    pub branch: usize,
    /// Receiver clock offset added to every sampling instant, in seconds.
    #[serde(default)]
    pub clock_delay: f64,
}

impl ChannelPlan {
    pub fn new(n_branches: usize, aggregate_bandwidth: f64, branch: usize) -> Result<Self> {
        check_odd_lines(n_branches).map_err(|_| {
            invalid("n_branches", format!("must be odd and at least 3, got {n_branches}"))
        })?;
        if !(aggregate_bandwidth.is_finite() && aggregate_bandwidth > 0.0) {
            return Err(invalid("aggregate_bandwidth", "must be positive"));
        }
        if branch == 0 || branch > n_branches {
            return Err(invalid("branch", format!("must be in 1..={n_branches}, got {branch}")));
        }
        Ok(Self {
            n_branches,
            aggregate_bandwidth,
            branch,
            clock_delay: 0.0,
        })
    }

    pub fn with_branch(&self, branch: usize) -> Result<Self> {
        Self::new(self.n_branches, self.aggregate_bandwidth, branch).map(|p| p.with_delay(self.clock_delay))
    }

    pub fn with_delay(mut self, delay: f64) -> Self {
        self.clock_delay = delay;
        self
    }

    pub fn branch_symbol_rate(&self) -> f64 {
        self.aggregate_bandwidth / self.n_branches as f64
    }

    /// Half-width of the detection low-pass, `B/(2N)`.
    pub fn detection_bandwidth(&self) -> f64 {
        0.5 * self.branch_symbol_rate()
    }

    /// Time offset of this branch's sampling sequence.
    pub fn sampling_offset(&self) -> f64 {
        (self.branch - 1) as f64 / self.aggregate_bandwidth + self.clock_delay
    }

    /// Instant of the `k`-th symbol of this branch at rate `B/N`.
    pub fn symbol_instant(&self, k: usize) -> f64 {
        (k * self.n_branches) as f64 / self.aggregate_bandwidth + self.sampling_offset()
    }

    pub fn all_branches(&self) -> Vec<ChannelPlan> {
        (1..=self.n_branches)
            .map(|l| self.with_branch(l).expect("branch index in range"))
            .collect()
    }

    fn sequence(&self) -> Result<SincSequenceSpec> {
        let base = branch_sequence(self, self.branch)?;
        SincSequenceSpec::new(base.n_lines, base.bandwidth, base.time_shift + self.clock_delay)
    }
}

/// RF phase that selects a branch: `2π(l−1)/N`.
pub fn branch_phase(plan: &ChannelPlan) -> f64 {
    2.0 * PI * (plan.branch - 1) as f64 / plan.n_branches as f64
}

/// MZM sampling gate: a drive plan, the device it drives, and the complex
/// field gain that maps the modulator transfer onto a unit sinc sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct MzmSampler {
    pub plan: DrivePlan,
    pub params: MzmParams,
    field_scale: Option<Complex64>,
}

impl MzmSampler {
    /// Sampler from a calibration result. Rejects calibrations that did not
    /// reach their flatness target.
    pub fn from_calibration(cal: &CombCalibration, params: MzmParams) -> Result<Self> {
        if !cal.converged {
            return Err(Error::Uncalibrated(format!(
                "calibration stopped at flatness {:.3} dB",
                cal.report.flatness_db
            )));
        }
        Ok(Self {
            plan: cal.plan.clone(),
            params,
            field_scale: Some(cal.field_scale),
        })
    }

    /// A hand-written plan with no calibration behind it. Sampling with it is
    /// rejected.
    pub fn uncalibrated(plan: DrivePlan, params: MzmParams) -> Self {
        Self {
            plan,
            params,
            field_scale: None,
        }
    }

    pub fn field_scale(&self) -> Option<Complex64> {
        self.field_scale
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Sampler {
    /// Exact multiplication by the branch sinc sequence.
    #[default]
    Ideal,
    Mzm(MzmSampler),
}

/// Multiplies `sig` by the sampling sequence of `plan.branch`.
pub fn sample_with_sequence(sig: &Signal, plan: &ChannelPlan, sampler: &Sampler) -> Result<Signal> {
    match sampler {
        Sampler::Ideal => {
            let seq = sinc_sequence(&plan.sequence()?, sig.grid())?;
            sig.mul(&seq)
        }
        Sampler::Mzm(mzm) => {
            let scale = mzm
                .field_scale
                .ok_or_else(|| Error::Uncalibrated("drive plan has no calibration".into()))?;
            let fundamental = mzm
                .plan
                .tones
                .first()
                .ok_or_else(|| invalid("tones", "drive plan has no tones"))?
                .frequency;
            let rate = plan.branch_symbol_rate();
            if ((fundamental - rate) / rate).abs() > 1e-9 {
                return Err(invalid(
                    "tones",
                    format!("drive fundamental {fundamental:e} Hz must equal B/N = {rate:e} Hz"),
                ));
            }
            let shifted = mzm.plan.time_shifted(plan.sampling_offset());
            let out = modulate(sig, &shifted, &mzm.params)?;
            Ok(out.scale(1.0 / scale))
        }
    }
}

/// Samples, low-pass filters to `±B/(2N)` and restores the gain `N`.
pub fn demultiplex(sig: &Signal, plan: &ChannelPlan, sampler: &Sampler) -> Result<Signal> {
    let sampled = sample_with_sequence(sig, plan, sampler)?;
    let filtered = brickwall_lowpass(&sampled, plan.detection_bandwidth())?;
    Ok(filtered.scale(Complex64::new(plan.n_branches as f64, 0.0)))
}

/// Reads `sig` at the given instants, which must fall on its grid.
pub fn sample_at(sig: &Signal, instants: impl IntoIterator<Item = f64>) -> Result<Vec<Complex64>> {
    instants
        .into_iter()
        .map(|t| {
            sig.grid()
                .index_of(t)
                .map(|i| sig.samples()[i])
                .ok_or_else(|| invalid("instant", format!("t = {t:e} s is not on the sample grid")))
        })
        .collect()
}

/// The first `count` symbol-instant values of the branch selected by `plan`.
pub fn branch_symbols(sig: &Signal, plan: &ChannelPlan, count: usize) -> Result<Vec<Complex64>> {
    sample_at(sig, (0..count).map(|k| plan.symbol_instant(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mzm::DrivePlan;
    use crate::signal::{rmse_percent, TimeGrid};

    const B: f64 = 24e9;

    fn grid(periods: usize) -> TimeGrid {
        TimeGrid::periodic(3.0 / B, periods, 24).unwrap()
    }

    #[test]
    fn plan_validation() {
        assert!(ChannelPlan::new(4, B, 1).is_err());
        assert!(ChannelPlan::new(3, B, 0).is_err());
        assert!(ChannelPlan::new(3, B, 4).is_err());
        assert!(ChannelPlan::new(3, 0.0, 1).is_err());
        let p = ChannelPlan::new(3, B, 2).unwrap();
        assert_eq!(p.branch_symbol_rate(), 8e9);
        assert_eq!(p.detection_bandwidth(), 4e9);
    }

    #[test]
    fn branch_phases() {
        let phases: Vec<f64> = (1..=3)
            .map(|l| branch_phase(&ChannelPlan::new(3, B, l).unwrap()))
            .collect();
        assert_eq!(phases[0], 0.0);
        assert!((phases[1] - 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((phases[2] - 4.0 * PI / 3.0).abs() < 1e-15);
        let p7: Vec<f64> = ChannelPlan::new(7, B, 1)
            .unwrap()
            .all_branches()
            .iter()
            .map(branch_phase)
            .collect();
        for i in 0..7 {
            for j in 0..i {
                assert!((p7[i] - p7[j]).abs() > 1e-3);
            }
        }
    }

    #[test]
    fn constant_input_returns_sequence() {
        let g = grid(5);
        let one = Signal::constant(g, Complex64::new(1.0, 0.0));
        let plan = ChannelPlan::new(3, B, 2).unwrap();
        let out = sample_with_sequence(&one, &plan, &Sampler::Ideal).unwrap();
        let seq = sinc_sequence(&SincSequenceSpec::new(3, B, 1.0 / B).unwrap(), &g).unwrap();
        assert!(rmse_percent(&out, &seq).unwrap() < 1e-12);
    }

    #[test]
    fn next_branch_is_one_over_b_later() {
        let g = grid(5);
        let one = Signal::constant(g, Complex64::new(1.0, 0.0));
        let p1 = ChannelPlan::new(3, B, 1).unwrap().with_delay(1.0 / B);
        let p2 = ChannelPlan::new(3, B, 2).unwrap();
        let a = sample_with_sequence(&one, &p1, &Sampler::Ideal).unwrap();
        let b = sample_with_sequence(&one, &p2, &Sampler::Ideal).unwrap();
        assert!(rmse_percent(&a, &b).unwrap() < 1e-12);
    }

    #[test]
    fn zero_in_zero_out() {
        let g = grid(7);
        let out = demultiplex(&Signal::zeros(g), &ChannelPlan::new(3, B, 3).unwrap(), &Sampler::Ideal).unwrap();
        assert!(out.samples().iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn mzm_without_calibration_rejected() {
        let g = grid(5);
        let one = Signal::constant(g, Complex64::new(1.0, 0.0));
        let plan = ChannelPlan::new(3, B, 1).unwrap();
        let drive = DrivePlan::push_pull(&[(8e9, 0.1, 0.0)], 0.0);
        let sampler = Sampler::Mzm(MzmSampler::uncalibrated(drive, MzmParams::default()));
        assert!(matches!(
            sample_with_sequence(&one, &plan, &sampler),
            Err(Error::Uncalibrated(_))
        ));
    }

    #[test]
    fn off_grid_instant_rejected() {
        let g = grid(3);
        let s = Signal::zeros(g);
        assert!(sample_at(&s, [0.5 / g.sample_rate]).is_err());
        assert!(sample_at(&s, [g.duration() + 1.0]).is_err());
    }
}
