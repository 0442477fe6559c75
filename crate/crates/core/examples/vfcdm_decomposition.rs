//! Decompose a chirp plus a steady tone on the 12-component grid and
//! reconstruct one band.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use skna::dsp::{interior_range, SampleSeries};
use skna::vfcdm::{components_for_band, decompose, reconstruct, VfcdmConfig};

fn main() -> skna::Result<()> {
    let rate = 1000.0;
    let n = 4000;
    let cfg = VfcdmConfig::for_rate(rate)?;
    for k in 1..=cfg.n_components {
        let (lo, hi) = cfg.band_hz(k);
        println!("component {k:>2}: center {:>5} Hz, band {lo}-{hi} Hz", cfg.center_hz(k));
    }

    // 100 Hz tone plus a chirp from 250 to 450 Hz.
    let x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            (2.0 * PI * 100.0 * t).sin() + 0.5 * (2.0 * PI * (250.0 * t + 25.0 * t * t)).sin()
        })
        .collect();
    let x = SampleSeries::new(x, rate)?;
    let tfs = decompose(&x, &cfg)?;
    let r = interior_range(n);
    let total: f64 = tfs.components.iter().map(|c| c.energy_in(r.clone())).sum();
    for c in &tfs.components {
        let share = c.energy_in(r.clone()) / total;
        if share > 0.01 {
            let mid = n / 2;
            println!(
                "component {:>2}: {:5.1}% of energy, {:.1} Hz at t=2 s",
                c.id,
                100.0 * share,
                c.frequency[mid]
            );
        }
    }

    let ids: BTreeSet<usize> = components_for_band(&cfg, (240.0, 480.0))?;
    let band = reconstruct(&tfs, &ids)?;
    println!("reconstructed 240-480 Hz from {ids:?}: {} samples", band.len());
    Ok(())
}
