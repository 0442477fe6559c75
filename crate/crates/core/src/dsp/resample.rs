//! Rational-ratio polyphase FIR resampling with a Kaiser-window anti-alias filter.

use std::f64::consts::PI;

use super::series::{check_rate, SampleSeries};
use crate::error::{Result, SknaError};

/// Largest numerator or denominator accepted for the reduced rate ratio.
pub const MAX_RATIO_TERM: u64 = 1000;

/// Stopband attenuation the prototype is designed for. Kaiser's length
/// estimate undershoots slightly, hence the margin over the 60 dB target.
const DESIGN_ATTENUATION_DB: f64 = 65.0;

/// Passband edge as a fraction of the lower of the two Nyquist frequencies.
/// The stopband begins at that Nyquist frequency.
pub const PASSBAND_FRACTION: f64 = 0.8;

/// Reduced `up / down` ratio such that `up / down == target / source`.
pub fn rational_ratio(source_rate: f64, target_rate: f64) -> Result<(u64, u64)> {
    check_rate(source_rate)?;
    check_rate(target_rate)?;
    let r = target_rate / source_rate;
    // Continued-fraction convergents, stopping at the first exact match.
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut v = r;
    for _ in 0..64 {
        let a = v.floor();
        if a > MAX_RATIO_TERM as f64 * 2.0 {
            break;
        }
        let a = a as u64;
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if h2 > MAX_RATIO_TERM || k2 > MAX_RATIO_TERM {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - r).abs() <= 1e-12 * r {
            return Ok((h1, k1));
        }
        let frac = v - a as f64;
        if frac <= 0.0 {
            break;
        }
        v = 1.0 / frac;
    }
    Err(SknaError::config(format!(
        "rate ratio {target_rate}/{source_rate} is not a rational with terms <= {MAX_RATIO_TERM}"
    )))
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Anti-alias lowpass prototype for an `up / down` conversion, designed at
/// the upsampled rate. Unity passband gain (the upsampling gain is applied
/// separately). Odd length, linear phase.
pub fn anti_alias_taps(up: u64, down: u64) -> Vec<f64> {
    // Frequencies normalized to the upsampled rate (cycles/sample).
    let nyq_min = 0.5 / up.max(down) as f64;
    let pass = PASSBAND_FRACTION * nyq_min;
    let cutoff = 0.5 * (pass + nyq_min);
    let transition = 2.0 * PI * (nyq_min - pass);

    let a = DESIGN_ATTENUATION_DB;
    let beta = 0.1102 * (a - 8.7);
    let mut n = ((a - 7.95) / (2.285 * transition)).ceil() as usize + 1;
    if n.is_multiple_of(2) {
        n += 1;
    }
    let mid = (n - 1) as f64 / 2.0;
    let i0_beta = bessel_i0(beta);
    (0..n)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = t / mid;
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            sinc * w
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Resamples `x` to `target_rate`. Output length is `round(len * target / source)`.
pub fn resample(x: &SampleSeries, target_rate: f64) -> Result<SampleSeries> {
    let (up, down) = rational_ratio(x.rate(), target_rate)?;
    if up == down {
        return Ok(x.clone());
    }
    let n_in = x.len();
    let n_out = (n_in as f64 * up as f64 / down as f64).round() as usize;
    if n_in == 0 {
        return Ok(SampleSeries::from_parts(Vec::new(), target_rate));
    }

    let taps = anti_alias_taps(up, down);
    let (up_us, down_us) = (up as usize, down as usize);
    let delay = (taps.len() - 1) / 2;
    let phase_len = taps.len().div_ceil(up_us);
    // bank[p][t] multiplies x[q - (phase_len - 1) + t]
    let bank: Vec<Vec<f64>> = (0..up_us)
        .map(|p| {
            (0..phase_len)
                .map(|t| {
                    let k = p + up_us * (phase_len - 1 - t);
                    taps.get(k).copied().unwrap_or(0.0) * up as f64
                })
                .collect()
        })
        .collect();

    let pad = phase_len + delay / up_us + 2;
    let ext = extend_for_resampling(x.samples(), pad);
    let out: Vec<f64> = (0..n_out)
        .map(|m| {
            let n0 = m * down_us + delay;
            let (q, p) = (n0 / up_us, n0 % up_us);
            let start = q + pad + 1 - phase_len;
            dot(&bank[p], &ext[start..start + phase_len])
        })
        .collect();
    Ok(SampleSeries::from_parts(out, target_rate))
}

/// Odd (point-symmetric) extension about each end, which keeps slope continuity.
fn extend_for_resampling(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    let at = |i: usize| x[i.min(n - 1)];
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - at(i)));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[(n - 1).saturating_sub(i)]));
    ext
}
