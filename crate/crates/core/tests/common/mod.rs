#![allow(dead_code)]

use num_complex::Complex64;
use otdm_core::demux::ChannelPlan;
use otdm_core::modem::{qam_map, Constellation};
use otdm_core::nyquist::SymbolStream;
use otdm_core::TimeGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const B: f64 = 24e9;

pub fn bits(seed: u64, n: usize) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<bool>()).collect()
}

pub fn stream(seed: u64, m: usize, c: &Constellation, rate: f64) -> SymbolStream {
    qam_map(&bits(seed, m * c.bits_per_symbol()), c, rate).unwrap()
}

/// `n` branch streams of `m` symbols at `B/n`.
pub fn streams(seed: u64, n: usize, m: usize, c: &Constellation) -> Vec<SymbolStream> {
    (0..n)
        .map(|l| stream(seed.wrapping_mul(31).wrapping_add(l as u64), m, c, B / n as f64))
        .collect()
}

/// Window of `m` branch symbols, `os` samples each (`os` divisible by `n`).
pub fn grid(n: usize, m: usize, os: usize) -> TimeGrid {
    TimeGrid::periodic(n as f64 / B, m, os).unwrap()
}

pub fn plan(n: usize, branch: usize) -> ChannelPlan {
    ChannelPlan::new(n, B, branch).unwrap()
}

/// Worst symbol error over the RMS of the reference.
pub fn relative_error(rx: &[Complex64], tx: &[Complex64]) -> f64 {
    let rms = (tx.iter().map(|x| x.norm_sqr()).sum::<f64>() / tx.len() as f64).sqrt();
    rx.iter().zip(tx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / rms
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}
