//! Whole study on a reduced synthetic cohort: indices at three rates, the
//! evaluation grid and the cross-rate comparison.

use skna::indices::{build_index_table_with, BaselinePolicy};
use skna::pipeline::{default_config, SknaKind, SUPPORTED_RATES};
use skna::stats::{compare_rates, evaluate_table, EvaluateOptions};
use skna::synth::{generate_participant, SynthSpec};

fn main() -> skna::Result<()> {
    let spec = SynthSpec {
        n_participants: 6,
        n_channels: 1,
        native_rate_hz: 4000.0,
        ..Default::default()
    };
    let configs = SUPPORTED_RATES
        .iter()
        .map(|&r| default_config(r))
        .collect::<skna::Result<Vec<_>>>()?;
    let table = build_index_table_with(
        spec.n_participants,
        |i| {
            let s = generate_participant(&spec, &spec.jitter, i)?;
            Ok((s.recording, s.annotations))
        },
        &configs,
        &SknaKind::ALL,
        &BaselinePolicy::default(),
    )?;
    println!("{} index rows", table.rows.len());

    let grid = evaluate_table(&table, &EvaluateOptions::default())?;
    println!("{}", grid.to_text_table());
    let cmp = compare_rates(&grid, Some(&table))?;
    println!("{}", cmp.summary());
    Ok(())
}
