use crate::error::{Result, SknaError};

/// A uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    samples: Vec<f64>,
    rate: f64,
}

impl SampleSeries {
    /// Builds a series, rejecting a non-positive rate or any non-finite sample.
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(SknaError::data_at("non-finite sample", i));
        }
        Ok(Self { samples, rate })
    }

    /// Skips the finiteness scan. Callers guarantee the invariant.
    pub(crate) fn from_parts(samples: Vec<f64>, rate: f64) -> Self {
        debug_assert!(rate > 0.0);
        Self { samples, rate }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SampleSeries {
        SampleSeries::from_parts(self.samples.iter().map(|&v| f(v)).collect(), self.rate)
    }
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(SknaError::config(format!(
            "sample rate must be positive, got {rate}"
        )))
    }
}
