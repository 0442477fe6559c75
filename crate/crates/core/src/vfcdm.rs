//! Variable frequency complex demodulation (VFCDM).
//!
//! A signal is split into `n` narrowband components on a uniform grid:
//! component `k` (1-based) is centered at `(2k - 1) Fw` and covers
//! `[(2k - 2) Fw, 2k Fw]`. Each component is estimated in two passes.
//!
//! 1. Fixed-carrier demodulation at the center frequency, lowpassed at `Fw`,
//!    gives the coarse analytic component `c1` and from its phase an
//!    instantaneous-frequency track, smoothed over 50 ms and clamped to the
//!    component band.
//! 2. The coarse component is re-demodulated on the tracked carrier
//!    `exp(-j 2 pi int f(t) dt)` and lowpassed again, giving the refined
//!    amplitude and frequency trajectories.
//!
//! Pass 2 works on the pass-1 component rather than on the raw input, so a
//! neighbour whose track is clamped against a shared band edge cannot pick
//! up a tone that belongs to the adjacent component, and the components keep
//! tiling the spectrum for reconstruction.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dsp::{self, design_filter, FilterSpec, SampleSeries, Sos};
use crate::error::{Result, SknaError};

/// Components per decomposition on the standard grid.
pub const STANDARD_COMPONENTS: usize = 12;

/// Ratio of sampling rate to half-bandwidth on the standard grid
/// (80 Hz at 4 kHz, 20 Hz at 1 kHz, 10 Hz at 0.5 kHz).
pub const RATE_TO_HALF_BANDWIDTH: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VfcdmConfig {
    pub rate_hz: f64,
    pub n_components: usize,
    /// `Fw`: component center spacing is `2 Fw`.
    pub half_bandwidth_hz: f64,
    pub first_pass_lpf_hz: f64,
    pub first_pass_order: usize,
    pub second_pass_lpf_hz: f64,
    pub second_pass_order: usize,
    /// Moving-average window applied to the pass-1 frequency track.
    pub frequency_smoothing_s: f64,
}

impl VfcdmConfig {
    /// The standard 12-component grid for a sampling rate.
    pub fn for_rate(rate_hz: f64) -> Result<Self> {
        Self::new(
            rate_hz,
            rate_hz / RATE_TO_HALF_BANDWIDTH,
            STANDARD_COMPONENTS,
        )
    }

    pub fn new(rate_hz: f64, half_bandwidth_hz: f64, n_components: usize) -> Result<Self> {
        let cfg = Self {
            rate_hz,
            n_components,
            half_bandwidth_hz,
            first_pass_lpf_hz: half_bandwidth_hz,
            first_pass_order: 8,
            // The band component is up to 2 Fw off the tracked carrier.
            second_pass_lpf_hz: 3.0 * half_bandwidth_hz,
            second_pass_order: 4,
            frequency_smoothing_s: 0.05,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        dsp::check_rate(self.rate_hz)?;
        let fw = self.half_bandwidth_hz;
        if !(fw > 0.0) || self.n_components == 0 {
            return Err(SknaError::config(
                "VFCDM needs Fw > 0 and at least one component",
            ));
        }
        let top = 2.0 * self.n_components as f64 * fw;
        if top > self.rate_hz / 2.0 * (1.0 + 1e-12) {
            return Err(SknaError::config(format!(
                "VFCDM grid reaches {top} Hz, above Nyquist {} Hz",
                self.rate_hz / 2.0
            )));
        }
        for (name, f) in [
            ("first", self.first_pass_lpf_hz),
            ("second", self.second_pass_lpf_hz),
        ] {
            if !(f > 0.0 && f < self.rate_hz / 2.0) {
                return Err(SknaError::config(format!(
                    "{name}-pass lowpass {f} Hz out of range"
                )));
            }
        }
        Ok(())
    }

    /// Center frequency of component `id` (1-based).
    pub fn center_hz(&self, id: usize) -> f64 {
        (2 * id - 1) as f64 * self.half_bandwidth_hz
    }

    /// Band interval of component `id` (1-based).
    pub fn band_hz(&self, id: usize) -> (f64, f64) {
        let fw = self.half_bandwidth_hz;
        ((2 * id - 2) as f64 * fw, (2 * id) as f64 * fw)
    }

    pub fn centers_hz(&self) -> Vec<f64> {
        (1..=self.n_components).map(|k| self.center_hz(k)).collect()
    }

    /// Minimum input length accepted by [`decompose`].
    pub fn min_len(&self) -> usize {
        (4.0 * self.rate_hz / self.half_bandwidth_hz).ceil() as usize
    }

    fn check_id(&self, id: usize) -> Result<()> {
        if id == 0 || id > self.n_components {
            return Err(SknaError::config(format!(
                "component {id} outside 1..={}",
                self.n_components
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub id: usize,
    pub center_hz: f64,
    pub band_hz: (f64, f64),
    /// Instantaneous amplitude, in the units of the input (a tone of
    /// amplitude A gives A).
    pub amplitude: Vec<f64>,
    /// Refined instantaneous frequency, Hz.
    pub frequency: Vec<f64>,
    /// Total instantaneous phase, rad: `y_k(t) = amplitude * cos(phase)`.
    pub phase: Vec<f64>,
}

impl Component {
    /// Mean-square power summed over time: `sum amplitude^2 / 2`.
    pub fn energy(&self) -> f64 {
        self.amplitude.iter().map(|a| a * a / 2.0).sum()
    }

    pub fn energy_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.amplitude[range].iter().map(|a| a * a / 2.0).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencySpectrum {
    pub rate_hz: f64,
    pub half_bandwidth_hz: f64,
    pub len: usize,
    pub components: Vec<Component>,
}

impl TimeFrequencySpectrum {
    pub fn component(&self, id: usize) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn energy(&self) -> f64 {
        self.components.iter().map(Component::energy).sum()
    }

    /// Writes `time,component,amplitude,frequency` rows, one per sample per
    /// component, every `stride` samples.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        writeln!(out, "time,component,amplitude,frequency")?;
        let stride = stride.max(1);
        for i in (0..self.len).step_by(stride) {
            let t = i as f64 / self.rate_hz;
            for c in &self.components {
                writeln!(out, "{t},{},{},{}", c.id, c.amplitude[i], c.frequency[i])?;
            }
        }
        Ok(())
    }
}

fn check_input(x: &SampleSeries, cfg: &VfcdmConfig) -> Result<()> {
    cfg.validate()?;
    if (x.rate() - cfg.rate_hz).abs() > 1e-9 * cfg.rate_hz {
        return Err(SknaError::config(format!(
            "signal rate {} Hz does not match VFCDM config rate {} Hz",
            x.rate(),
            cfg.rate_hz
        )));
    }
    if x.len() < cfg.min_len() {
        return Err(SknaError::data(format!(
            "VFCDM needs at least {} samples, got {}",
            cfg.min_len(),
            x.len()
        )));
    }
    Ok(())
}

/// Phase difference across a centered pair, halved; one-sided at the ends.
fn phase_rate(re: &[f64], im: &[f64]) -> Vec<f64> {
    let n = re.len();
    let arg = |a: usize, b: usize| {
        // arg(c[a] * conj(c[b]))
        let r = re[a] * re[b] + im[a] * im[b];
        let i = im[a] * re[b] - re[a] * im[b];
        i.atan2(r)
    };
    let mut d = vec![0.0; n];
    if n < 2 {
        return d;
    }
    d[0] = arg(1, 0);
    d[n - 1] = arg(n - 1, n - 2);
    for i in 1..n - 1 {
        d[i] = 0.5 * arg(i + 1, i - 1);
    }
    d
}

/// Visits `exp(j omega n)` for consecutive `n` by rotation, re-anchored
/// exactly every `ANCHOR` samples so rounding cannot accumulate.
fn for_each_carrier(omega: f64, len: usize, mut f: impl FnMut(usize, f64, f64)) {
    const ANCHOR: usize = 256;
    let (rs, rc) = omega.sin_cos();
    let (mut cr, mut ci) = (1.0, 0.0);
    for n in 0..len {
        if n % ANCHOR == 0 {
            let (s, c) = (omega * n as f64).rem_euclid(2.0 * PI).sin_cos();
            (cr, ci) = (c, s);
        }
        f(n, cr, ci);
        (cr, ci) = (cr * rc - ci * rs, cr * rs + ci * rc);
    }
}

/// Cumulative trapezoid of the tracked offset from the center frequency,
/// `psi[n] = 2 pi int (f - f_k) dt`.
fn for_each_offset_phase(carrier_hz: &[f64], fk: f64, rate: f64, mut f: impl FnMut(usize, f64)) {
    let mut psi = 0.0;
    for n in 0..carrier_hz.len() {
        if n > 0 {
            psi += PI * ((carrier_hz[n - 1] - fk) + (carrier_hz[n] - fk)) / rate;
        }
        f(n, psi);
    }
}

/// Everything pass 2 produces for one component.
struct Track {
    /// Refined complex envelope relative to the tracked carrier.
    env_re: Vec<f64>,
    env_im: Vec<f64>,
    /// `exp(j psi)` of the tracked offset phase.
    offset_cos: Vec<f64>,
    offset_sin: Vec<f64>,
    /// Smoothed, clamped pass-1 frequency track.
    carrier_hz: Vec<f64>,
}

struct Filters {
    first: Sos,
    second: Sos,
}

impl Filters {
    fn new(cfg: &VfcdmConfig) -> Result<Self> {
        Ok(Self {
            first: design_filter(
                &FilterSpec::lowpass(cfg.first_pass_lpf_hz, cfg.first_pass_order),
                cfg.rate_hz,
            )?,
            second: design_filter(
                &FilterSpec::lowpass(cfg.second_pass_lpf_hz, cfg.second_pass_order),
                cfg.rate_hz,
            )?,
        })
    }
}

fn track(x: &[f64], cfg: &VfcdmConfig, filters: &Filters, id: usize) -> Result<Track> {
    let rate = cfg.rate_hz;
    let fk = cfg.center_hz(id);
    let fw = cfg.half_bandwidth_hz;
    let omega = 2.0 * PI * fk / rate;
    let n = x.len();

    // Pass 1: fixed carrier.
    let (mut zr, mut zi) = (vec![0.0; n], vec![0.0; n]);
    for_each_carrier(omega, n, |i, c, s| {
        zr[i] = x[i] * c;
        zi[i] = -x[i] * s;
    });
    let (mut c1r, mut c1i) = dsp::filtfilt_complex(&filters.first, &zr, &zi)?;

    let w = dsp::window_samples(cfg.frequency_smoothing_s, rate)?;
    let mut raw = phase_rate(&c1r, &c1i);
    let to_hz = rate / (2.0 * PI);
    for d in raw.iter_mut() {
        *d = fk + *d * to_hz;
    }
    let mut carrier_hz = dsp::moving_average_slice(&raw, w);
    drop(raw);
    for f in carrier_hz.iter_mut() {
        *f = f.clamp(fk - fw, fk + fw);
    }

    // Pass 2: c1 * exp(-j psi) is the pass-1 component demodulated by the
    // tracked carrier exp(-j (omega n + psi)). c1 is consumed in place and
    // its buffers keep exp(j psi) for reconstruction.
    for_each_offset_phase(&carrier_hz, fk, rate, |i, psi| {
        let (s, c) = psi.sin_cos();
        let (a, b) = (c1r[i], c1i[i]);
        zr[i] = a * c + b * s;
        zi[i] = b * c - a * s;
        c1r[i] = c;
        c1i[i] = s;
    });
    let (env_re, env_im) = dsp::filtfilt_complex(&filters.second, &zr, &zi)?;
    Ok(Track {
        env_re,
        env_im,
        offset_cos: c1r,
        offset_sin: c1i,
        carrier_hz,
    })
}

fn to_component(cfg: &VfcdmConfig, id: usize, t: Track) -> Result<Component> {
    let rate = cfg.rate_hz;
    let fk = cfg.center_hz(id);
    let omega = 2.0 * PI * fk / rate;
    let (lo, hi) = cfg.band_hz(id);
    let slack = cfg.half_bandwidth_hz / 2.0;

    let amplitude: Vec<f64> = t
        .env_re
        .iter()
        .zip(&t.env_im)
        .map(|(r, i)| 2.0 * r.hypot(*i))
        .collect();
    let residual = phase_rate(&t.env_re, &t.env_im);
    let refined: Vec<f64> = t
        .carrier_hz
        .iter()
        .zip(&residual)
        .map(|(f, d)| f + d * rate / (2.0 * PI))
        .collect();
    let w = dsp::window_samples(cfg.frequency_smoothing_s, rate)?;
    let frequency = dsp::moving_average_slice(&refined, w)
        .into_iter()
        .map(|f| f.clamp(lo - slack, hi + slack))
        .collect();
    let mut phase = vec![0.0; t.env_re.len()];
    for_each_offset_phase(&t.carrier_hz, fk, rate, |n, psi| {
        phase[n] = omega * n as f64 + psi + t.env_im[n].atan2(t.env_re[n]);
    });
    Ok(Component {
        id,
        center_hz: fk,
        band_hz: (lo, hi),
        amplitude,
        frequency,
        phase,
    })
}

/// Full decomposition into all `cfg.n_components` components.
pub fn decompose(x: &SampleSeries, cfg: &VfcdmConfig) -> Result<TimeFrequencySpectrum> {
    let ids: BTreeSet<usize> = (1..=cfg.n_components).collect();
    decompose_components(x, cfg, &ids)
}

/// Decomposition restricted to the listed components.
pub fn decompose_components(
    x: &SampleSeries,
    cfg: &VfcdmConfig,
    ids: &BTreeSet<usize>,
) -> Result<TimeFrequencySpectrum> {
    check_input(x, cfg)?;
    for &id in ids {
        cfg.check_id(id)?;
    }
    let filters = Filters::new(cfg)?;
    let components = ids
        .iter()
        .map(|&id| to_component(cfg, id, track(x.samples(), cfg, &filters, id)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(TimeFrequencySpectrum {
        rate_hz: cfg.rate_hz,
        half_bandwidth_hz: cfg.half_bandwidth_hz,
        len: x.len(),
        components,
    })
}

/// Sum of the selected components: `y(t) = sum amplitude_k cos(phase_k)`.
pub fn reconstruct(tfs: &TimeFrequencySpectrum, ids: &BTreeSet<usize>) -> Result<SampleSeries> {
    let mut y = vec![0.0; tfs.len];
    for &id in ids {
        let c = tfs.component(id).ok_or_else(|| {
            SknaError::config(format!("component {id} not present in the spectrum"))
        })?;
        for (v, (a, p)) in y.iter_mut().zip(c.amplitude.iter().zip(&c.phase)) {
            *v += a * p.cos();
        }
    }
    Ok(SampleSeries::from_parts(y, tfs.rate_hz))
}

/// `reconstruct(decompose_components(x, ids), ids)` without keeping the
/// per-component trajectories in memory.
pub fn band_signal(
    x: &SampleSeries,
    cfg: &VfcdmConfig,
    ids: &BTreeSet<usize>,
) -> Result<SampleSeries> {
    check_input(x, cfg)?;
    for &id in ids {
        cfg.check_id(id)?;
    }
    let filters = Filters::new(cfg)?;
    let mut y = vec![0.0; x.len()];
    for &id in ids {
        let omega = 2.0 * PI * cfg.center_hz(id) / cfg.rate_hz;
        let t = track(x.samples(), cfg, &filters, id)?;
        for_each_carrier(omega, x.len(), |n, cw, sw| {
            // 2 Re{env * exp(j omega n) * exp(j psi)}
            let c = cw * t.offset_cos[n] - sw * t.offset_sin[n];
            let s = sw * t.offset_cos[n] + cw * t.offset_sin[n];
            y[n] += 2.0 * (t.env_re[n] * c - t.env_im[n] * s);
        });
    }
    Ok(SampleSeries::from_parts(y, x.rate()))
}

/// Component ids whose bands exactly tile `band_hz`.
pub fn components_for_band(cfg: &VfcdmConfig, band_hz: (f64, f64)) -> Result<BTreeSet<usize>> {
    let (lo, hi) = band_hz;
    let fw2 = 2.0 * cfg.half_bandwidth_hz;
    let tol = 1e-9 * hi.abs().max(1.0);
    let first = lo / fw2;
    let last = hi / fw2;
    let aligned = |v: f64| (v - v.round()).abs() * fw2 <= tol;
    if !(lo < hi) || lo < -tol || !aligned(first) || !aligned(last) {
        return Err(SknaError::config(format!(
            "band {lo}-{hi} Hz does not align with the {fw2} Hz component grid"
        )));
    }
    let (first, last) = (first.round() as usize, last.round() as usize);
    if last > cfg.n_components {
        return Err(SknaError::config(format!(
            "band {lo}-{hi} Hz extends beyond component {}",
            cfg.n_components
        )));
    }
    Ok((first + 1..=last).collect())
}
