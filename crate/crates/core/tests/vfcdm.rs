mod common;

use std::collections::BTreeSet;

use common::*;
use skna::dsp::SampleSeries;
use skna::vfcdm::{band_signal, decompose, decompose_components, reconstruct, VfcdmConfig};

fn series(x: Vec<f64>, rate: f64) -> SampleSeries {
    SampleSeries::new(x, rate).unwrap()
}

#[test]
fn center_tone_lands_in_its_component() {
    let rate = 4000.0;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let x = series(sine(240.0, 1.0, rate, 8000), rate);
    let tfs = decompose(&x, &cfg).unwrap();
    let r = interior(8000, 0.05);
    let total: f64 = tfs.components.iter().map(|c| c.energy_in(r.clone())).sum();
    let share = tfs.component(2).unwrap().energy_in(r) / total;
    assert!(share >= 0.95, "share {share}");
}

#[test]
fn two_tones_separate_into_their_bands() {
    let rate = 1000.0;
    let n = 4000;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let x = sine(100.0, 1.0, rate, n);
    // 400 Hz is the boundary between components 10 and 11; check both the
    // boundary tone and one at component 10's center.
    for (f2, owners) in [(400.0, vec![3usize, 10, 11]), (380.0, vec![3, 10])] {
        let tone = sine(f2, 1.0, rate, n);
        let sig: Vec<f64> = x.iter().zip(&tone).map(|(a, b)| a + b).collect();
        let tfs = decompose(&series(sig.clone(), rate), &cfg).unwrap();
        let r = interior(n, 0.05);
        let total: f64 = tfs.components.iter().map(|c| c.energy_in(r.clone())).sum();
        let owned: f64 = owners
            .iter()
            .map(|&k| tfs.component(k).unwrap().energy_in(r.clone()))
            .sum();
        assert!(
            1.0 - owned / total < 0.05,
            "leak {} for {f2}",
            1.0 - owned / total
        );

        // Independent oracle: DFT band energies over the same component bands.
        let bands: Vec<(f64, f64)> = (1..=12).map(|k| cfg.band_hz(k)).collect();
        let oracle = fft_band_energy(&sig, rate, &bands);
        let oracle_total: f64 = oracle.iter().sum();
        let oracle_owned: f64 = owners.iter().map(|&k| oracle[k - 1]).sum();
        assert!(1.0 - oracle_owned / oracle_total < 0.05);
    }
}

#[test]
fn reconstruction_of_band_limited_noise() {
    let rate = 1000.0;
    let n = 8000;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let nyq = rate / 2.0;
    let x = band_limited_noise(0.3 * nyq, 0.45 * nyq, rate, n, 7);
    let tfs = decompose(&series(x.clone(), rate), &cfg).unwrap();
    let all: BTreeSet<usize> = (1..=12).collect();
    let y = reconstruct(&tfs, &all).unwrap();
    let r = interior(n, 0.05);
    let err: Vec<f64> = r.clone().map(|i| y.samples()[i] - x[i]).collect();
    let rel = rms(&err) / rms(&x[r]);
    assert!(rel < 0.05, "relative error {rel}");
}

#[test]
fn single_tone_round_trip() {
    let rate = 4000.0;
    let n = 8000;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let x = sine(240.0, 1.0, rate, n);
    let tfs = decompose(&series(x.clone(), rate), &cfg).unwrap();
    let y = reconstruct(&tfs, &[2].into()).unwrap();
    let r = interior(n, 0.05);
    let (a, b) = (&x[r.clone()], &y.samples()[r]);
    let corr = pearson(a, b);
    assert!(corr >= 0.98, "corr {corr}");
}

#[test]
fn streaming_band_signal_matches_reconstruct() {
    let rate = 1000.0;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let x = series(band_limited_noise(150.0, 480.0, rate, 3000, 3), rate);
    let ids: BTreeSet<usize> = [7, 8, 9, 10, 11, 12].into();
    let a = reconstruct(&decompose_components(&x, &cfg, &ids).unwrap(), &ids).unwrap();
    let b = band_signal(&x, &cfg, &ids).unwrap();
    let scale = rms(a.samples());
    for (u, v) in a.samples().iter().zip(b.samples()) {
        assert!((u - v).abs() <= 1e-9 * scale);
    }
}

#[test]
fn tone_amplitude_and_frequency_tracking_near_edges() {
    for rate in [4000.0, 1000.0, 500.0] {
        let cfg = VfcdmConfig::for_rate(rate).unwrap();
        let fw = cfg.half_bandwidth_hz;
        let n = (4.0 * rate) as usize;
        let r = interior(n, 0.05);
        for k in [2usize, 6, 11] {
            let (lo, hi) = cfg.band_hz(k);
            for f0 in [lo + fw / 4.0, cfg.center_hz(k), hi - fw / 4.0] {
                let x = series(sine(f0, 2.0, rate, n), rate);
                let tfs = decompose_components(&x, &cfg, &[k].into()).unwrap();
                let c = tfs.component(k).unwrap();
                for i in r.clone() {
                    assert!(
                        (c.amplitude[i] - 2.0).abs() < 0.1,
                        "amp {} at {f0} Hz",
                        c.amplitude[i]
                    );
                    assert!(
                        (c.frequency[i] - f0).abs() < 0.02 * f0,
                        "freq {} vs {f0}",
                        c.frequency[i]
                    );
                }
            }
        }
    }
}

#[test]
fn energy_is_not_created() {
    let rate = 1000.0;
    let n = 4000;
    let cfg = VfcdmConfig::for_rate(rate).unwrap();
    let fw = cfg.half_bandwidth_hz;
    let mut cases = vec![band_limited_noise(20.0, 470.0, rate, n, 11)];
    for f in [
        cfg.center_hz(4),
        cfg.band_hz(6).0 + fw / 4.0,
        cfg.band_hz(9).1,
    ] {
        cases.push(sine(f, 1.0, rate, n));
    }
    for x in cases {
        let tfs = decompose(&series(x.clone(), rate), &cfg).unwrap();
        let input: f64 = x.iter().map(|v| v * v).sum();
        assert!(tfs.energy() <= 1.05 * input, "{} > {}", tfs.energy(), input);
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
