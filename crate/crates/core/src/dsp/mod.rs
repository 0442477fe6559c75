//! Signal primitives shared by both SKNA pipelines: rate conversion,
//! Butterworth/notch filtering, rectification, smoothing, analytic envelope.

mod envelope;
mod filter;
mod resample;
mod series;
mod spectrum;

pub use envelope::{
    analytic_amplitude, interior_range, moving_average, rectify, window_samples,
    HILBERT_EDGE_FRACTION, MIN_HILBERT_LEN,
};
pub use filter::{
    design_filter, filtfilt, Biquad, FilterKind, FilterSpec, Sos, DEFAULT_NOTCH_Q, DEFAULT_ORDER,
};
pub use resample::{anti_alias_taps, rational_ratio, resample, MAX_RATIO_TERM, PASSBAND_FRACTION};
pub use series::SampleSeries;
pub use spectrum::{band_power, periodogram, spectral_peaks, SpectralPeak};

pub(crate) use envelope::moving_average_slice;
pub(crate) use filter::filtfilt_complex;
pub(crate) use series::check_rate;
