mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::Complex64;
use otdm_core::demux::{branch_symbols, demultiplex, MzmSampler, Sampler};
use otdm_core::modem::Constellation;
use otdm_core::mzm::{
    calibrate_flat_comb, comb_report, modulate, CalibrationOptions, DrivePlan, DriveTone, EoModel, MzmParams,
};
use otdm_core::nyquist::{otdm_multiplex, sinc_sequence, SincSequenceSpec, SymbolStream};
use otdm_core::signal::{rmse_percent, spectrum};
use otdm_core::{Signal, TimeGrid};
use proptest::prelude::*;

/// `J_k(x) = (1/π)∫₀^π cos(kτ − x·sinτ) dτ`, composite Simpson.
fn bessel_j(k: i64, x: f64) -> f64 {
    let n = 2000;
    let h = PI / n as f64;
    let f = |t: f64| (k as f64 * t - x * t.sin()).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

fn cw(grid: TimeGrid) -> Signal {
    Signal::constant(grid, Complex64::new(1.0, 0.0))
}

/// Naive DFT bin at integer index `k`, amplitude scaled.
fn dft_bin(x: &Signal, k: i64) -> Complex64 {
    let n = x.len() as f64;
    x.samples()
        .iter()
        .enumerate()
        .map(|(i, v)| v * Complex64::from_polar(1.0, -2.0 * PI * k as f64 * i as f64 / n))
        .sum::<Complex64>()
        / n
}

#[test]
fn single_tone_lines_follow_bessel_functions() {
    let f = 10e9;
    let grid = TimeGrid::periodic(1.0 / f, 3, 64).unwrap();
    let params = MzmParams::ideal();
    let (amp, b1, b2) = (0.05, 0.4, -1.1);
    let m = PI * amp / params.v_pi;
    let plan = DrivePlan {
        tones: vec![DriveTone {
            frequency: f,
            amplitude_arm1: amp,
            amplitude_arm2: amp,
            phase_arm1: 0.0,
            phase_arm2: PI,
        }],
        bias_arm1: b1,
        bias_arm2: b2,
    };
    let sp = spectrum(&modulate(&cw(grid), &plan, &params).unwrap());
    for k in -4i64..=4 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let expect = 0.5
            * bessel_j(k, m)
            * (Complex64::from_polar(1.0, b1) + sign * Complex64::from_polar(1.0, b2));
        let got = sp.bins[sp.index_of(k as f64 * f).unwrap()];
        assert!((got - expect).norm() < 1e-9, "k = {k}: {got} vs {expect}");
    }
}

#[test]
fn ideal_three_line_calibration_matches_brute_force_scan() {
    let spacing = 10e9;
    let grid = TimeGrid::periodic(1.0 / spacing, 2, 64).unwrap();
    let params = MzmParams::ideal();
    let cal = calibrate_flat_comb(3, spacing, &params, &CalibrationOptions::default(), &grid).unwrap();
    assert!(cal.converged);
    let m = cal.modulation_index;

    let delta = (cal.plan.bias_arm1 - cal.plan.bias_arm2).rem_euclid(2.0 * PI);
    let delta = if delta > PI { 2.0 * PI - delta } else { delta };

    // grid scan of the analytic balance J0·|cos(Δ/2)| = J1·|sin(Δ/2)|; the
    // calibrated point must sit on the scanned locus
    let mut locus = Vec::new();
    for i in 0..=200 {
        let mi = m * (0.5 + i as f64 / 200.0);
        let (j0, j1) = (bessel_j(0, mi), bessel_j(1, mi));
        for j in 0..=3600 {
            let dj = j as f64 / 3600.0 * PI;
            let gap = 20.0 * ((j0 * (dj / 2.0).cos()) / (j1 * (dj / 2.0).sin())).log10();
            if gap.abs() < 0.02 {
                locus.push((mi, dj));
            }
        }
    }
    assert!(!locus.is_empty());
    let nearest = locus
        .iter()
        .map(|&(mi, dj)| ((mi - m) / m).abs() + (dj - delta).abs())
        .fold(f64::INFINITY, f64::min);
    assert!(nearest < 0.01, "calibrated point (m {m}, Δ {delta}) is {nearest} off the locus");
    // equal-power condition also holds with the calibrated values directly
    let gap = 20.0 * ((bessel_j(0, m) * (delta / 2.0).cos()) / (bessel_j(1, m) * (delta / 2.0).sin())).log10();
    assert!(gap.abs() < 0.1, "{gap}");
}

#[test]
fn suppression_matches_manual_inspection() {
    let spacing = 20e9;
    let grid = TimeGrid::periodic(1.0 / spacing, 2, 48).unwrap();
    let params = MzmParams::default();
    let cal = calibrate_flat_comb(3, spacing, &params, &CalibrationOptions::default(), &grid).unwrap();
    let out = modulate(&cw(grid), &cal.plan, &params).unwrap();
    let periods = 2;
    let p = |k: i64| 10.0 * dft_bin(&out, k * periods).norm_sqr().log10();
    let nominal_min = [-1, 0, 1].map(p).into_iter().fold(f64::INFINITY, f64::min);
    let nominal_max = [-1, 0, 1].map(p).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let unwanted_max = [-3, -2, 2, 3].map(p).into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert!((cal.report.sideband_suppression_db - (nominal_min - unwanted_max)).abs() < 1e-6);
    assert!((cal.report.flatness_db - (nominal_max - nominal_min)).abs() < 1e-6);
}

#[test]
fn calibrated_comb_is_a_sinc_sequence() {
    let params = MzmParams::default();
    for spacing in [10e9, 20e9, 30e9] {
        let grid = TimeGrid::periodic(1.0 / spacing, 3, 36).unwrap();
        let cal = calibrate_flat_comb(3, spacing, &params, &CalibrationOptions::default(), &grid).unwrap();
        assert!(cal.converged && cal.report.flatness_db <= 0.1, "{}", cal.table());
        let out = modulate(&cw(grid), &cal.plan, &params).unwrap();
        let ideal = sinc_sequence(&SincSequenceSpec::new(3, 3.0 * spacing, 0.0).unwrap(), &grid).unwrap();
        let rmse = rmse_percent(&out.scale(1.0 / cal.field_scale), &ideal).unwrap();
        assert!(rmse <= 1.0, "{spacing:e}: {rmse}");
    }
}

#[test]
fn thirty_ghz_needs_more_drive() {
    let params = MzmParams::default();
    let amp = |spacing: f64| {
        let grid = TimeGrid::periodic(1.0 / spacing, 1, 36).unwrap();
        let cal = calibrate_flat_comb(3, spacing, &params, &CalibrationOptions::default(), &grid).unwrap();
        assert!(cal.converged);
        assert!(cal.report.sideband_suppression_db >= 20.0);
        0.5 * (cal.plan.tones[0].amplitude_arm1 + cal.plan.tones[0].amplitude_arm2)
    };
    assert!(amp(30e9) > 1.5 * amp(10e9));
}

#[test]
fn two_tone_input_is_convolved_with_the_comb() {
    let spacing = 10e9;
    let grid = TimeGrid::periodic(1.0 / spacing, 8, 64).unwrap();
    let params = MzmParams::default();
    let cal = calibrate_flat_comb(3, spacing, &params, &CalibrationOptions::default(), &grid).unwrap();
    let comb = spectrum(&modulate(&cw(grid), &cal.plan, &params).unwrap());
    let (f1, f2) = (1.25e9, -3.75e9);
    let (a1, a2) = (Complex64::new(0.8, 0.1), Complex64::new(-0.3, 0.4));
    let input = Signal::from_fn(grid, |t| {
        a1 * Complex64::from_polar(1.0, 2.0 * PI * f1 * t) + a2 * Complex64::from_polar(1.0, 2.0 * PI * f2 * t)
    });
    let out = spectrum(&modulate(&input, &cal.plan, &params).unwrap());
    for k in -1i64..=1 {
        let c = comb.bins[comb.index_of(k as f64 * spacing).unwrap()];
        for (f, a) in [(f1, a1), (f2, a2)] {
            let got = out.bins[out.index_of(f + k as f64 * spacing).unwrap()];
            let expect = a * c;
            assert!((got - expect).norm() <= 1e-6 * expect.norm(), "k {k} f {f:e}");
        }
    }
}

#[test]
fn calibrated_mzm_cross_talk_below_40_db() {
    let (n, m) = (3, 21);
    let g = grid(n, m, 18);
    let params = MzmParams::default();
    let cal = calibrate_flat_comb(n, B / n as f64, &params, &CalibrationOptions::default(), &g).unwrap();
    assert!(cal.report.flatness_db <= 0.1);
    let sampler = Sampler::Mzm(MzmSampler::from_calibration(&cal, params).unwrap());
    let live = streams(9, n, m, &Constellation::qpsk());
    for active in 1..=n {
        let chans: Vec<SymbolStream> = (1..=n)
            .map(|l| {
                let mut s = live[l - 1].clone();
                if l != active {
                    s.symbols.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
                }
                s
            })
            .collect();
        let x = otdm_multiplex(&chans, &plan(n, 1), &g).unwrap();
        let e: Vec<f64> = (1..=n)
            .map(|l| {
                let p = plan(n, l);
                energy(&branch_symbols(&demultiplex(&x, &p, &sampler).unwrap(), &p, m).unwrap())
            })
            .collect();
        for l in (1..=n).filter(|&l| l != active) {
            let xt = 10.0 * (e[active - 1] / e[l - 1]).log10();
            assert!(xt >= 40.0, "active {active} branch {l}: {xt} dB");
        }
    }
}

#[test]
fn mzm_and_ideal_samplers_agree() {
    let (n, m) = (3, 15);
    let g = grid(n, m, 18);
    let params = MzmParams::default();
    let cal = calibrate_flat_comb(n, B / n as f64, &params, &CalibrationOptions::default(), &g).unwrap();
    let sampler = Sampler::Mzm(MzmSampler::from_calibration(&cal, params).unwrap());
    let chans = streams(2, n, m, &Constellation::qam16());
    let x = otdm_multiplex(&chans, &plan(n, 1), &g).unwrap();
    for l in 1..=n {
        let p = plan(n, l);
        let a = otdm_core::demux::sample_with_sequence(&x, &p, &Sampler::Ideal).unwrap();
        let b = otdm_core::demux::sample_with_sequence(&x, &p, &sampler).unwrap();
        assert!(rmse_percent(&b, &a).unwrap() < 1.0);
    }
}

#[test]
fn gaussian_eo_model_also_calibrates() {
    let params = MzmParams {
        eo_model: EoModel::Gaussian,
        ..MzmParams::default()
    };
    let grid = TimeGrid::periodic(1.0 / 20e9, 1, 36).unwrap();
    let cal = calibrate_flat_comb(3, 20e9, &params, &CalibrationOptions::default(), &grid).unwrap();
    assert!(cal.converged);
}

#[test]
fn unreachable_target_is_flagged() {
    let grid = TimeGrid::periodic(1.0 / 10e9, 1, 36).unwrap();
    let opts = CalibrationOptions {
        suppression_floor_db: 120.0,
        depth_steps: 6,
        ..Default::default()
    };
    let cal = calibrate_flat_comb(3, 10e9, &MzmParams::default(), &opts, &grid).unwrap();
    assert!(!cal.converged);
    assert!(MzmSampler::from_calibration(&cal, MzmParams::default()).is_err());
}

fn random_plan() -> impl Strategy<Value = DrivePlan> {
    let tone = (0.01f64..2.0, 0.01f64..2.0, -PI..PI, -PI..PI);
    (prop::collection::vec(tone, 0..4), -PI..PI, -PI..PI).prop_map(|(tones, b1, b2)| DrivePlan {
        tones: tones
            .into_iter()
            .enumerate()
            .map(|(j, (a1, a2, p1, p2))| DriveTone {
                frequency: (j + 1) as f64 * 5e9,
                amplitude_arm1: a1,
                amplitude_arm2: a2,
                phase_arm1: p1,
                phase_arm2: p2,
            })
            .collect(),
        bias_arm1: b1,
        bias_arm2: b2,
    })
}

fn device() -> impl Strategy<Value = MzmParams> {
    (1.0f64..60.0, 1.0f64..60.0, 0.0f64..6.0).prop_map(|(e1, e2, il)| MzmParams {
        dc_extinction_arm1_db: e1,
        dc_extinction_arm2_db: e2,
        insertion_loss_db: il,
        ..MzmParams::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulator_is_passive(plan in random_plan(), params in device(), seed in any::<u64>()) {
        let grid = TimeGrid::new(80e9, 128, 0.0).unwrap();
        let x = Signal::from_fn(grid, |t| Complex64::from_polar(1.0 + (t * 1e10 + seed as f64).sin(), 3e10 * t));
        let y = modulate(&x, &plan, &params).unwrap();
        for (a, b) in y.samples().iter().zip(x.samples()) {
            prop_assert!(a.norm_sqr() <= b.norm_sqr() * (1.0 + 1e-12));
        }
        prop_assert!(y.power() <= x.power() * (1.0 + 1e-12));
    }

    #[test]
    fn modulator_is_linear_in_the_field(
        plan in random_plan(),
        params in device(),
        ar in -2.0f64..2.0, ai in -2.0f64..2.0, br in -2.0f64..2.0, bi in -2.0f64..2.0,
    ) {
        let grid = TimeGrid::new(80e9, 96, 0.0).unwrap();
        let x = Signal::from_fn(grid, |t| Complex64::from_polar(1.0, 2e10 * t));
        let y = Signal::from_fn(grid, |t| Complex64::new((5e9 * t).cos(), -0.5));
        let (a, b) = (Complex64::new(ar, ai), Complex64::new(br, bi));
        let lhs = modulate(&x.scale(a).add(&y.scale(b)).unwrap(), &plan, &params).unwrap();
        let rhs = modulate(&x, &plan, &params).unwrap().scale(a)
            .add(&modulate(&y, &plan, &params).unwrap().scale(b)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().peak() < 1e-12);
    }
}

#[test]
fn comb_report_round_trips_json() {
    let grid = TimeGrid::periodic(1.0 / 10e9, 1, 36).unwrap();
    let cal = calibrate_flat_comb(3, 10e9, &MzmParams::default(), &CalibrationOptions::default(), &grid).unwrap();
    let sp = spectrum(&modulate(&cw(grid), &cal.plan, &MzmParams::default()).unwrap());
    let report = comb_report(&sp, 3, 10e9).unwrap();
    let back = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(report, back);
    let plan: DrivePlan = serde_json::from_str(&serde_json::to_string(&cal.plan).unwrap()).unwrap();
    assert_eq!(plan, cal.plan);
}
