//! iSKNA and TVSKNA of one synthetic participant at every supported rate.

use skna::pipeline::{compute_kinds, default_config, SknaKind, SUPPORTED_RATES};
use skna::recording::Task;
use skna::synth::{generate, SynthSpec};

fn main() -> skna::Result<()> {
    let spec = SynthSpec {
        n_channels: 1,
        native_rate_hz: 4000.0,
        ..Default::default()
    };
    let s = generate(&spec)?;
    let channel = &s.recording.channel(0).expect("one channel").series;
    println!(
        "{}: {:.0} s at {} Hz",
        s.recording.participant_id(),
        s.recording.duration_s(),
        s.recording.rate()
    );

    for rate in SUPPORTED_RATES {
        let cfg = default_config(rate)?;
        for out in compute_kinds(channel, &cfg, &SknaKind::ALL)? {
            let x = out.samples();
            let mean_in = |task: Task| {
                let segs: Vec<_> = s.annotations.iter().filter(|a| a.label == task).collect();
                let total: f64 = segs
                    .iter()
                    .map(|a| {
                        let i0 = (a.start_s * rate) as usize;
                        let i1 = (a.end_s() * rate) as usize;
                        x[i0..i1].iter().sum::<f64>() / (i1 - i0) as f64
                    })
                    .sum();
                total / segs.len() as f64
            };
            println!(
                "{:>4} Hz {:<6}: baseline {:.4} mV, VM {:.4} mV, TG {:.4} mV",
                rate,
                out.kind,
                mean_in(Task::Baseline),
                mean_in(Task::Vm),
                mean_in(Task::Tg)
            );
        }
    }
    Ok(())
}
