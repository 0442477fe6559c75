//! Skin sympathetic nerve activity (SKNA) extraction from ECG.
//!
//! Two SKNA series are derived from each ECG channel at 4, 1 and 0.5 kHz:
//! iSKNA (bandpass, rectify, 100 ms moving average) and TVSKNA (highpass,
//! notches, variable frequency complex demodulation, Hilbert amplitude,
//! 100 ms moving average). Per-segment max/mean/SD indices feed a
//! random-intercept mixed model, Cohen's d, ROC AUC and ICC, so that the
//! three rates can be compared cell by cell.
//!
//! The runnable programs under `examples/` walk through each capability:
//!
//! ```bash
//! cargo run --example dsp_primitives
//! cargo run --example vfcdm_decomposition
//! cargo run --example extract_skna
//! cargo run --example segment_indices
//! cargo run --example mixed_model_statistics
//! cargo run --example synthetic_cohort
//! cargo run --example cross_rate_study
//! ```

pub mod cli;
pub mod dsp;
pub mod error;
pub mod fsio;
pub mod indices;
pub mod pipeline;
pub mod plot;
pub mod provenance;
pub mod recording;
pub mod stats;
pub mod synth;
pub mod vfcdm;

pub use error::{Result, SknaError};
