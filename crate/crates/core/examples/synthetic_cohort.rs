//! Write a small synthetic cohort with ground truth to a directory.
//!
//! Usage: `cargo run --example synthetic_cohort -- [out_dir]`

use std::path::PathBuf;

use skna::recording::RecordingFormat;
use skna::synth::{write_cohort, SynthSpec};

fn main() -> skna::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("skna-cohort"));
    let spec = SynthSpec {
        n_participants: 4,
        native_rate_hz: 4000.0,
        ..Default::default()
    };
    println!("{}", spec.to_toml());
    let files = write_cohort(&spec, &out, RecordingFormat::Csv)?;
    for (rec, ann) in files.recordings.iter().zip(&files.annotations) {
        println!("{} + {}", rec.display(), ann.display());
    }
    println!("ground truth: {}", files.ground_truth.display());
    Ok(())
}
