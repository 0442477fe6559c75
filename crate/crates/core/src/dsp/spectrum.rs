//! Periodogram helpers: band power and a spectral-peak report for picking
//! notch frequencies by hand.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::series::SampleSeries;

/// One-sided power spectrum of a Hann-windowed signal. Returns `(freq_hz, power)`.
pub fn periodogram(x: &SampleSeries) -> Vec<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Vec::new();
    }
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    let norm: f64 = window.iter().map(|w| w * w).sum::<f64>();
    let mut buf: Vec<Complex64> = x
        .samples()
        .iter()
        .zip(&window)
        .map(|(&v, &w)| Complex64::new(v * w, 0.0))
        .collect();
    FftPlanner::<f64>::new()
        .plan_fft_forward(n)
        .process(&mut buf);
    let df = x.rate() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let scale = if k == 0 || (n.is_multiple_of(2) && k == n / 2) {
                1.0
            } else {
                2.0
            };
            (k as f64 * df, scale * buf[k].norm_sqr() / (norm * x.rate()))
        })
        .collect()
}

/// Integrated periodogram power between `lo_hz` and `hi_hz`.
pub fn band_power(x: &SampleSeries, lo_hz: f64, hi_hz: f64) -> f64 {
    let spec = periodogram(x);
    let df = x.rate() / x.len().max(1) as f64;
    spec.iter()
        .filter(|(f, _)| *f >= lo_hz && *f < hi_hz)
        .map(|(_, p)| p * df)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub freq_hz: f64,
    /// Peak power over the median spectral power, in dB.
    pub prominence_db: f64,
}

/// Local spectral maxima standing at least `min_prominence_db` above the
/// median power, strongest first, at most `max_peaks`.
pub fn spectral_peaks(
    x: &SampleSeries,
    max_peaks: usize,
    min_prominence_db: f64,
) -> Vec<SpectralPeak> {
    let spec = periodogram(x);
    if spec.len() < 3 {
        return Vec::new();
    }
    let mut powers: Vec<f64> = spec.iter().map(|(_, p)| *p).collect();
    powers.sort_by(f64::total_cmp);
    let median = powers[powers.len() / 2].max(f64::MIN_POSITIVE);
    let mut peaks: Vec<SpectralPeak> = spec
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1)
        .map(|w| SpectralPeak {
            freq_hz: w[1].0,
            prominence_db: 10.0 * (w[1].1 / median).log10(),
        })
        .filter(|p| p.prominence_db >= min_prominence_db)
        .collect();
    peaks.sort_by(|a, b| b.prominence_db.total_cmp(&a.prominence_db));
    peaks.truncate(max_peaks);
    peaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mains_tone_shows_up_as_top_peak() {
        let rate = 1000.0;
        let s: Vec<f64> = (0..4000)
            .map(|i| {
                let t = i as f64 / rate;
                (2.0 * std::f64::consts::PI * 60.0 * t).sin()
                    + 0.01 * ((i * 7919 % 101) as f64 / 101.0 - 0.5)
            })
            .collect();
        let x = SampleSeries::new(s, rate).unwrap();
        let peaks = spectral_peaks(&x, 3, 20.0);
        assert!((peaks[0].freq_hz - 60.0).abs() < 0.5);
    }

    #[test]
    fn band_power_of_sine_is_half_amplitude_squared() {
        let rate = 1000.0;
        let s: Vec<f64> = (0..8000)
            .map(|i| 2.0 * (2.0 * std::f64::consts::PI * 100.0 * i as f64 / rate).sin())
            .collect();
        let x = SampleSeries::new(s, rate).unwrap();
        let p = band_power(&x, 90.0, 110.0);
        assert!((p - 2.0).abs() < 0.02, "{p}");
    }
}
