use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::series::SampleSeries;
use crate::error::{Result, SknaError};

/// Minimum length accepted by [`analytic_amplitude`].
pub const MIN_HILBERT_LEN: usize = 16;

/// Fraction of samples at each end of an analytic envelope that carries
/// FFT wrap-around artefacts. Flagged, not trimmed.
pub const HILBERT_EDGE_FRACTION: f64 = 0.05;

pub fn rectify(x: &SampleSeries) -> SampleSeries {
    x.map(f64::abs)
}

/// Window length in samples for a duration at a rate.
pub fn window_samples(window_s: f64, rate: f64) -> Result<usize> {
    let w = (window_s * rate).round();
    if !(w >= 1.0) || !window_s.is_finite() {
        return Err(SknaError::config(format!(
            "moving-average window {window_s} s is shorter than one sample at {rate} Hz"
        )));
    }
    Ok(w as usize)
}

/// Centered moving average of `w` samples; the window shrinks at the ends.
pub(crate) fn moving_average_slice(x: &[f64], w: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    let before = (w - 1) / 2;
    let after = w - 1 - before;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(before);
            let hi = (i + after + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Centered moving average with edge clipping. Output length equals input length.
pub fn moving_average(x: &SampleSeries, window_s: f64) -> Result<SampleSeries> {
    let w = window_samples(window_s, x.rate())?;
    Ok(SampleSeries::from_parts(
        moving_average_slice(x.samples(), w),
        x.rate(),
    ))
}

/// `|x + j H(x)|` with `H` the FFT-based Hilbert transform.
pub(crate) fn analytic_amplitude_slice(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < MIN_HILBERT_LEN {
        return Err(SknaError::data(format!(
            "analytic amplitude needs at least {MIN_HILBERT_LEN} samples, got {n}"
        )));
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    // One-sided spectrum: keep DC (and Nyquist for even n), double positives.
    let half = n / 2;
    let positive_end = if n.is_multiple_of(2) { half } else { half + 1 };
    for v in &mut buf[1..positive_end] {
        *v *= 2.0;
    }
    for v in &mut buf[half + 1..] {
        *v = Complex64::new(0.0, 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / n as f64;
    Ok(buf.iter().map(|c| c.norm() * scale).collect())
}

pub fn analytic_amplitude(x: &SampleSeries) -> Result<SampleSeries> {
    Ok(SampleSeries::from_parts(
        analytic_amplitude_slice(x.samples())?,
        x.rate(),
    ))
}

/// Index range of the interior of a series of length `n`, excluding the
/// flagged Hilbert edge fraction on both sides.
pub fn interior_range(n: usize) -> std::ops::Range<usize> {
    let edge = (n as f64 * HILBERT_EDGE_FRACTION).ceil() as usize;
    edge.min(n)..n.saturating_sub(edge).max(edge.min(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectify_examples() {
        let x = SampleSeries::new(vec![-1.0, 2.0, -3.0], 1.0).unwrap();
        assert_eq!(rectify(&x).samples(), &[1.0, 2.0, 3.0]);
        let pos = SampleSeries::new(vec![0.0, 0.5, 7.0], 1.0).unwrap();
        assert_eq!(rectify(&pos), pos);
    }

    #[test]
    fn hundred_ms_at_four_khz_is_400_samples() {
        assert_eq!(window_samples(0.1, 4000.0).unwrap(), 400);
        assert_eq!(window_samples(0.1, 500.0).unwrap(), 50);
    }

    #[test]
    fn sub_sample_window_is_config_error() {
        let x = SampleSeries::new(vec![1.0; 10], 100.0).unwrap();
        assert!(matches!(
            moving_average(&x, 0.001),
            Err(SknaError::Config(_))
        ));
    }

    #[test]
    fn constant_stays_constant() {
        let x = SampleSeries::new(vec![3.25; 1000], 1000.0).unwrap();
        let y = moving_average(&x, 0.1).unwrap();
        assert!(y.samples().iter().all(|&v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn impulse_spreads_to_plateau() {
        let mut s = vec![0.0; 1000];
        s[500] = 1.0;
        let x = SampleSeries::new(s, 1000.0).unwrap();
        let y = moving_average(&x, 0.1).unwrap();
        let nonzero: Vec<usize> = (0..1000).filter(|&i| y.samples()[i] != 0.0).collect();
        assert_eq!(nonzero.len(), 100);
        for &i in &nonzero {
            assert!((y.samples()[i] - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn hilbert_rejects_short_input() {
        let x = SampleSeries::new(vec![1.0; 8], 100.0).unwrap();
        assert!(matches!(
            analytic_amplitude(&x),
            Err(SknaError::Data { .. })
        ));
    }

    #[test]
    fn zero_in_zero_out() {
        let x = SampleSeries::new(vec![0.0; 64], 100.0).unwrap();
        assert!(analytic_amplitude(&x)
            .unwrap()
            .samples()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn interior_excludes_five_percent() {
        assert_eq!(interior_range(1000), 50..950);
        assert_eq!(interior_range(0), 0..0);
    }
}
