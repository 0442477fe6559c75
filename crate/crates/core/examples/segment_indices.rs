//! Per-segment max, mean and SD for one participant, with baseline pairing.

use skna::indices::{participant_rows, BaselinePolicy};
use skna::pipeline::{default_config, SknaKind};
use skna::synth::{generate, SynthSpec};

fn main() -> skna::Result<()> {
    let spec = SynthSpec {
        n_channels: 1,
        native_rate_hz: 4000.0,
        ..Default::default()
    };
    let s = generate(&spec)?;
    let cfg = default_config(1000.0)?;
    let table = participant_rows(
        &s.recording,
        &s.annotations,
        &[cfg],
        &[SknaKind::Iskna],
        &BaselinePolicy::default(),
    )?;
    println!("{:<14} {:<5} {:<9} {:>8} {:>8} {:>8}", "segment", "task", "condition", "max", "mean", "sd");
    for r in &table.rows {
        println!(
            "{:<14} {:<5} {:<9} {:>8.4} {:>8.4} {:>8.4}",
            r.segment_id,
            r.task.to_string(),
            r.condition.to_string(),
            r.max,
            r.mean,
            r.sd
        );
    }
    for e in &table.excluded {
        println!("excluded: {e:?}");
    }
    Ok(())
}
