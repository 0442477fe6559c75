//! The two SKNA extractors, each configurable for the 4, 1 and 0.5 kHz rows.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{
    self, analytic_amplitude, design_filter, filtfilt, moving_average, rectify, resample,
    FilterSpec, SampleSeries, DEFAULT_NOTCH_Q, DEFAULT_ORDER,
};
use crate::error::{Result, SknaError};
use crate::vfcdm::{self, VfcdmConfig};

/// Target rates with a standard band configuration.
pub const SUPPORTED_RATES: [f64; 3] = [4000.0, 1000.0, 500.0];

pub const DEFAULT_NOTCHES_HZ: [f64; 3] = [60.0, 120.0, 180.0];
pub const TVSKNA_HIGHPASS_HZ: f64 = 150.0;
pub const SMOOTHING_WINDOW_S: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SknaKind {
    Iskna,
    Tvskna,
}

impl SknaKind {
    pub const ALL: [SknaKind; 2] = [SknaKind::Iskna, SknaKind::Tvskna];
}

impl fmt::Display for SknaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SknaKind::Iskna => "iskna",
            SknaKind::Tvskna => "tvskna",
        })
    }
}

impl FromStr for SknaKind {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "iskna" => Ok(SknaKind::Iskna),
            "tvskna" => Ok(SknaKind::Tvskna),
            other => Err(SknaError::config(format!("unknown SKNA kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Notch {
    pub freq_hz: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub target_rate_hz: f64,
    pub iskna_band_hz: (f64, f64),
    pub tvskna_band_hz: (f64, f64),
    pub tvskna_highpass_hz: f64,
    pub notches: Vec<Notch>,
    /// Also apply the notches that fall inside the iSKNA band to the iSKNA path.
    pub notch_iskna: bool,
    pub smoothing_window_s: f64,
    pub filter_order: usize,
    pub vfcdm: VfcdmConfig,
}

/// The band configuration for one of the supported target rates.
pub fn default_config(rate_hz: f64) -> Result<PipelineConfig> {
    let (iskna, tvskna) = match rate_hz {
        r if r == 4000.0 => ((500.0, 1000.0), (480.0, 1120.0)),
        r if r == 1000.0 => ((250.0, 500.0), (240.0, 480.0)),
        r if r == 500.0 => ((150.0, 250.0), (160.0, 240.0)),
        other => {
            return Err(SknaError::config(format!(
                "unsupported target rate {other} Hz (supported: 4000, 1000, 500)"
            )))
        }
    };
    let notches = DEFAULT_NOTCHES_HZ
        .iter()
        .filter(|&&f| f < rate_hz / 2.0)
        .map(|&freq_hz| Notch {
            freq_hz,
            q: DEFAULT_NOTCH_Q,
        })
        .collect();
    let cfg = PipelineConfig {
        target_rate_hz: rate_hz,
        iskna_band_hz: iskna,
        tvskna_band_hz: tvskna,
        tvskna_highpass_hz: TVSKNA_HIGHPASS_HZ,
        notches,
        notch_iskna: false,
        smoothing_window_s: SMOOTHING_WINDOW_S,
        filter_order: DEFAULT_ORDER,
        vfcdm: VfcdmConfig::for_rate(rate_hz)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        dsp::check_rate(self.target_rate_hz)?;
        if (self.vfcdm.rate_hz - self.target_rate_hz).abs() > 1e-9 {
            return Err(SknaError::config(
                "VFCDM rate differs from pipeline target rate",
            ));
        }
        vfcdm::components_for_band(&self.vfcdm, self.tvskna_band_hz)?;
        self.iskna_filter().validate_at(self.target_rate_hz)?;
        dsp::window_samples(self.smoothing_window_s, self.target_rate_hz)?;
        Ok(())
    }

    /// The iSKNA band filter. A band whose upper edge reaches Nyquist is a
    /// highpass at its lower edge.
    pub fn iskna_filter(&self) -> FilterSpec {
        let (lo, hi) = self.iskna_band_hz;
        if hi >= self.target_rate_hz / 2.0 {
            FilterSpec::highpass(lo, self.filter_order)
        } else {
            FilterSpec::bandpass(lo, hi, self.filter_order)
        }
    }

    /// Notches below Nyquist, as filter specs.
    pub fn notch_filters(&self) -> Vec<FilterSpec> {
        self.notches
            .iter()
            .filter(|n| n.freq_hz < self.target_rate_hz / 2.0)
            .map(|n| FilterSpec::notch(n.freq_hz, n.q))
            .collect()
    }
}

impl FilterSpec {
    fn validate_at(&self, rate: f64) -> Result<()> {
        design_filter(self, rate).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SknaSeries {
    pub kind: SknaKind,
    pub series: SampleSeries,
    pub config: PipelineConfig,
}

impl SknaSeries {
    pub fn samples(&self) -> &[f64] {
        self.series.samples()
    }

    pub fn rate(&self) -> f64 {
        self.series.rate()
    }

    /// `time_s,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time_s,value")?;
        let rate = self.rate();
        for (i, v) in self.samples().iter().enumerate() {
            writeln!(out, "{},{}", i as f64 / rate, v)?;
        }
        Ok(())
    }
}

fn to_target_rate(x: &SampleSeries, cfg: &PipelineConfig) -> Result<SampleSeries> {
    cfg.validate()?;
    if x.rate() < cfg.target_rate_hz {
        return Err(SknaError::config(format!(
            "channel rate {} Hz is below the target rate {} Hz",
            x.rate(),
            cfg.target_rate_hz
        )));
    }
    resample(x, cfg.target_rate_hz)
}

fn apply(spec: &FilterSpec, x: &SampleSeries) -> Result<SampleSeries> {
    filtfilt(&design_filter(spec, x.rate())?, x)
}

/// Resample, band filter, rectify, 100 ms moving average.
pub fn compute_iskna(channel: &SampleSeries, cfg: &PipelineConfig) -> Result<SknaSeries> {
    iskna_at_rate(&to_target_rate(channel, cfg)?, cfg)
}

/// Resample, 150 Hz highpass, notches, VFCDM band reconstruction, Hilbert
/// amplitude, 100 ms moving average.
pub fn compute_tvskna(channel: &SampleSeries, cfg: &PipelineConfig) -> Result<SknaSeries> {
    tvskna_at_rate(&to_target_rate(channel, cfg)?, cfg)
}

pub fn compute(kind: SknaKind, channel: &SampleSeries, cfg: &PipelineConfig) -> Result<SknaSeries> {
    compute_kinds(channel, cfg, &[kind]).map(|mut v| v.remove(0))
}

/// Several kinds from one channel, sharing the resampling step.
pub fn compute_kinds(
    channel: &SampleSeries,
    cfg: &PipelineConfig,
    kinds: &[SknaKind],
) -> Result<Vec<SknaSeries>> {
    let x = to_target_rate(channel, cfg)?;
    kinds
        .iter()
        .map(|kind| match kind {
            SknaKind::Iskna => iskna_at_rate(&x, cfg),
            SknaKind::Tvskna => tvskna_at_rate(&x, cfg),
        })
        .collect()
}

fn iskna_at_rate(x: &SampleSeries, cfg: &PipelineConfig) -> Result<SknaSeries> {
    let mut x = apply(&cfg.iskna_filter(), x)?;
    if cfg.notch_iskna {
        let (lo, hi) = cfg.iskna_band_hz;
        for n in cfg.notch_filters() {
            let f = n.edges_hz[0];
            if f >= lo && f <= hi {
                x = apply(&n, &x)?;
            }
        }
    }
    let smoothed = moving_average(&rectify(&x), cfg.smoothing_window_s)?;
    Ok(SknaSeries {
        kind: SknaKind::Iskna,
        series: smoothed,
        config: cfg.clone(),
    })
}

fn tvskna_at_rate(x: &SampleSeries, cfg: &PipelineConfig) -> Result<SknaSeries> {
    let mut x = apply(
        &FilterSpec::highpass(cfg.tvskna_highpass_hz, cfg.filter_order),
        x,
    )?;
    for n in cfg.notch_filters() {
        x = apply(&n, &x)?;
    }
    let ids = vfcdm::components_for_band(&cfg.vfcdm, cfg.tvskna_band_hz)?;
    let band = vfcdm::band_signal(&x, &cfg.vfcdm, &ids)?;
    let envelope = analytic_amplitude(&band)?;
    let smoothed = moving_average(&envelope, cfg.smoothing_window_s)?;
    Ok(SknaSeries {
        kind: SknaKind::Tvskna,
        series: smoothed,
        config: cfg.clone(),
    })
}
