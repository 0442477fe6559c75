//! Filters, resampling and envelopes on a synthetic amplitude-modulated tone.

use std::f64::consts::PI;

use skna::dsp::{
    analytic_amplitude, design_filter, filtfilt, interior_range, moving_average, rectify,
    resample, FilterSpec, SampleSeries,
};

fn main() -> skna::Result<()> {
    let rate = 10_000.0;
    let n = 20_000;
    // 700 Hz carrier, 2 Hz modulation, 60 Hz hum.
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            (1.0 + 0.5 * (2.0 * PI * 2.0 * t).cos()) * (2.0 * PI * 700.0 * t).sin()
                + 0.3 * (2.0 * PI * 60.0 * t).sin()
        })
        .collect();
    let x = SampleSeries::new(x, rate)?;

    let down = resample(&x, 4000.0)?;
    println!("resampled {} -> {} samples", x.len(), down.len());

    let band = FilterSpec::bandpass(500.0, 1000.0, 4);
    let sos = design_filter(&band, 4000.0)?;
    for f in [60.0, 500.0, 700.0, 1000.0, 1500.0] {
        println!("  |H({f:>6} Hz)| = {:.4}", sos.magnitude(f, 4000.0));
    }
    let y = filtfilt(&sos, &down)?;

    let env = analytic_amplitude(&y)?;
    let smooth = moving_average(&rectify(&y), 0.1)?;
    for i in interior_range(env.len()).step_by(500) {
        println!(
            "t={:.3} s  envelope {:.3}  rectified mean {:.3}",
            i as f64 / 4000.0,
            env.samples()[i],
            smooth.samples()[i]
        );
    }
    Ok(())
}
