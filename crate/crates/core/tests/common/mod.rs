#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

pub fn sine(freq: f64, amp: f64, rate: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin())
        .collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn interior(n: usize, frac: f64) -> std::ops::Range<usize> {
    let e = (n as f64 * frac).ceil() as usize;
    e..n - e
}

/// White Gaussian-ish noise restricted to `[lo, hi]` Hz by zeroing FFT bins.
pub fn band_limited_noise(lo: f64, hi: f64, rate: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() + rng.random::<f64>() + rng.random::<f64>() - 1.5;
            Complex64::new(u, 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * rate / n as f64;
        if f < lo || f > hi {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Energy of `x` per band `[lo, hi)`, from the DFT.
pub fn fft_band_energy(x: &[f64], rate: f64, bands: &[(f64, f64)]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    bands
        .iter()
        .map(|&(lo, hi)| {
            (0..n)
                .filter(|&k| {
                    let f = k.min(n - k) as f64 * rate / n as f64;
                    f >= lo && f < hi
                })
                .map(|k| buf[k].norm_sqr())
                .sum::<f64>()
                / n as f64
        })
        .collect()
}
