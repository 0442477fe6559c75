//! Synthetic ECG recordings with known sympathetic bursts.
//!
//! Each channel is a stylized QRS pulse train plus white noise and a mains
//! tone, over low-level tonic activity in the burst band. Inside every
//! stimulus segment a fixed number of bursts is added:
//! white noise brick-wall filtered to the burst band, shaped by a Hann
//! envelope so the spectrum stays inside the band. Baselines stay burst-free.
//!
//! All randomness comes from one ChaCha stream per participant, so a cohort
//! is reproducible from `(seed, participant index)` alone.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SknaError};
use crate::fsio::write_atomic;
use crate::recording::{
    save_annotations, save_recording, Recording, RecordingFormat, SegmentAnnotation, Task,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BurstSpec {
    pub band_hz: (f64, f64),
    /// RMS of one burst over its duration.
    pub amplitude_mv: f64,
    pub duration_s: f64,
    /// Bursts per stimulus segment.
    pub count: usize,
    /// Burst gain of each channel; empty means 1 for every channel. Gains
    /// past the channel count are ignored.
    pub channel_gains: Vec<f64>,
}

impl Default for BurstSpec {
    fn default() -> Self {
        Self {
            band_hz: (150.0, 500.0),
            amplitude_mv: 0.05,
            duration_s: 2.0,
            count: 4,
            channel_gains: vec![1.0, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    pub white_sigma_mv: f64,
    pub mains_hz: f64,
    pub mains_amplitude_mv: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            white_sigma_mv: 0.01,
            mains_hz: 60.0,
            mains_amplitude_mv: 0.02,
        }
    }
}

/// Between-participant variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Jitter {
    pub heart_rate_sd_bpm: f64,
    /// Sigma of the lognormal burst-amplitude factor.
    pub amplitude_log_sigma: f64,
    /// Sigma of the lognormal noise-level factor.
    pub noise_log_sigma: f64,
}

impl Jitter {
    pub fn none() -> Self {
        Self {
            heart_rate_sd_bpm: 0.0,
            amplitude_log_sigma: 0.0,
            noise_log_sigma: 0.0,
        }
    }
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            heart_rate_sd_bpm: 5.0,
            amplitude_log_sigma: 0.25,
            noise_log_sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub n_participants: usize,
    pub native_rate_hz: f64,
    pub n_channels: usize,
    pub heart_rate_bpm: f64,
    /// Beat-to-beat interval variation as a fraction of the mean interval.
    pub rr_variability: f64,
    pub qrs_amplitude_mv: f64,
    /// Width (sigma) of the Gaussian-derivative QRS pulse.
    pub qrs_width_ms: f64,
    /// RMS of continuous burst-band activity present in every segment,
    /// scaled like the bursts by the participant amplitude factor.
    pub tonic_mv: f64,
    pub burst: BurstSpec,
    pub noise: NoiseSpec,
    pub jitter: Jitter,
    /// Recording length; defaults to 5 s past the last planned segment.
    pub duration_s: Option<f64>,
    pub plan: Vec<SegmentAnnotation>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_participants: 16,
            native_rate_hz: 10_000.0,
            n_channels: 2,
            heart_rate_bpm: 70.0,
            rr_variability: 0.03,
            qrs_amplitude_mv: 1.0,
            qrs_width_ms: 10.0,
            tonic_mv: 0.005,
            burst: BurstSpec::default(),
            noise: NoiseSpec::default(),
            jitter: Jitter::default(),
            duration_s: None,
            plan: standard_plan(),
            seed: 1,
        }
    }
}

/// Two Valsalva blocks, one Stroop block and four thermal-grill blocks
/// (VAS 2, 3, 5, 6), each preceded by an annotated baseline of the same
/// length and a 5 s pause, with 5 s rests between blocks.
pub fn standard_plan() -> Vec<SegmentAnnotation> {
    let mut plan = Vec::new();
    let mut t = 5.0;
    let blocks = [
        (Task::Vm, None),
        (Task::Vm, None),
        (Task::St, None),
        (Task::Tg, Some(2.0)),
        (Task::Tg, Some(3.0)),
        (Task::Tg, Some(5.0)),
        (Task::Tg, Some(6.0)),
    ];
    for (task, vas) in blocks {
        let len = task.default_duration_s().expect("stimulus task");
        plan.push(SegmentAnnotation::new(Task::Baseline, t, len, None).expect("valid"));
        plan.push(SegmentAnnotation::new(task, t + len + 5.0, len, vas).expect("valid"));
        t += 2.0 * len + 10.0;
    }
    plan
}

impl SynthSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SynthSpec =
            toml::from_str(text).map_err(|e| SknaError::config(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn duration(&self) -> f64 {
        self.duration_s.unwrap_or_else(|| {
            self.plan
                .iter()
                .map(SegmentAnnotation::end_s)
                .fold(0.0, f64::max)
                + 5.0
        })
    }

    pub fn channel_gain(&self, channel: usize) -> f64 {
        self.burst
            .channel_gains
            .get(channel)
            .copied()
            .unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SknaError::config(m));
        let nyquist = self.native_rate_hz / 2.0;
        if !(self.native_rate_hz.is_finite() && self.native_rate_hz > 0.0) {
            return bad(format!("native rate {} must be > 0", self.native_rate_hz));
        }
        if self.n_participants == 0 || self.n_channels == 0 {
            return bad("need at least one participant and one channel".into());
        }
        let (lo, hi) = self.burst.band_hz;
        if !(lo > 0.0 && lo < hi && hi < nyquist) {
            return bad(format!(
                "burst band {lo}-{hi} Hz must lie inside (0, {nyquist}) Hz"
            ));
        }
        if !(self.burst.channel_gains.is_empty()
            || self.burst.channel_gains.len() >= self.n_channels)
        {
            return bad(format!(
                "{} burst channel gains for {} channels",
                self.burst.channel_gains.len(),
                self.n_channels
            ));
        }
        let non_negative = [
            ("burst amplitude", self.burst.amplitude_mv),
            ("noise sigma", self.noise.white_sigma_mv),
            ("mains amplitude", self.noise.mains_amplitude_mv),
            ("QRS amplitude", self.qrs_amplitude_mv),
            ("tonic amplitude", self.tonic_mv),
            ("RR variability", self.rr_variability),
            ("heart-rate jitter", self.jitter.heart_rate_sd_bpm),
            ("amplitude jitter", self.jitter.amplitude_log_sigma),
            ("noise jitter", self.jitter.noise_log_sigma),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be >= 0"));
            }
        }
        if !(self.heart_rate_bpm > 0.0 && self.qrs_width_ms > 0.0 && self.burst.duration_s > 0.0) {
            return bad("heart rate, QRS width and burst duration must be > 0".into());
        }
        if self.plan.is_empty() {
            return bad("segment plan is empty".into());
        }
        for a in &self.plan {
            SegmentAnnotation::new(a.label, a.start_s, a.duration_s, a.vas)
                .map_err(|e| SknaError::config(format!("segment plan: {e}")))?;
            if a.label != Task::Baseline
                && self.burst.count as f64 * self.burst.duration_s > a.duration_s
            {
                return bad(format!(
                    "{} bursts of {} s do not fit the {} s {} segment at {} s",
                    self.burst.count, self.burst.duration_s, a.duration_s, a.label, a.start_s
                ));
            }
        }
        let mut sorted = self.plan.clone();
        sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        for w in sorted.windows(2) {
            if w[1].start_s < w[0].end_s() {
                return bad(format!(
                    "{} segment at {} s overlaps {} segment at {} s",
                    w[1].label, w[1].start_s, w[0].label, w[0].start_s
                ));
            }
        }
        let duration = self.duration();
        if sorted.last().is_some_and(|a| a.end_s() > duration) {
            return bad(format!("segment plan runs past the {duration} s recording"));
        }
        Ok(())
    }
}

/// Where one burst was placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstTruth {
    pub segment: usize,
    pub start_s: f64,
    pub duration_s: f64,
}

/// Per-participant ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub index: usize,
    pub heart_rate_bpm: f64,
    pub amplitude_factor: f64,
    pub noise_factor: f64,
    pub mains_phase: f64,
    pub bursts: Vec<BurstTruth>,
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub recording: Recording,
    pub annotations: Vec<SegmentAnnotation>,
    pub truth: ParticipantTruth,
}

pub fn participant_id(index: usize) -> String {
    format!("P{:02}", index + 1)
}

/// One recording with no between-participant jitter.
pub fn generate(spec: &SynthSpec) -> Result<Synthetic> {
    generate_participant(spec, &Jitter::none(), 0)
}

/// All participants of the cohort. Each one is independent of the others,
/// so [`generate_participant`] can be used to stream a large cohort.
pub fn generate_cohort(spec: &SynthSpec, jitter: &Jitter) -> Result<Vec<Synthetic>> {
    (0..spec.n_participants)
        .map(|i| generate_participant(spec, jitter, i))
        .collect()
}

pub fn generate_participant(spec: &SynthSpec, jitter: &Jitter, index: usize) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);

    let heart_rate =
        (spec.heart_rate_bpm + jitter.heart_rate_sd_bpm * gauss(&mut rng)).clamp(30.0, 200.0);
    let amplitude_factor = (jitter.amplitude_log_sigma * gauss(&mut rng)).exp();
    let noise_factor = (jitter.noise_log_sigma * gauss(&mut rng)).exp();
    let mains_phase = std::f64::consts::TAU * rng.random::<f64>();

    let rate = spec.native_rate_hz;
    let n = (spec.duration() * rate).round() as usize;
    let mut common = vec![0.0; n];
    add_qrs_train(&mut common, spec, heart_rate, &mut rng);
    if spec.noise.mains_amplitude_mv > 0.0 {
        let w = std::f64::consts::TAU * spec.noise.mains_hz / rate;
        for (i, v) in common.iter_mut().enumerate() {
            *v += spec.noise.mains_amplitude_mv * (w * i as f64 + mains_phase).sin();
        }
    }

    let mut annotations = spec.plan.clone();
    annotations.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut bursts = if spec.tonic_mv > 0.0 {
        let mut t = band_limited_noise(n, rate, spec.burst.band_hz, &mut rng);
        t.iter_mut()
            .for_each(|v| *v *= spec.tonic_mv * amplitude_factor);
        t
    } else {
        vec![0.0; n]
    };
    let mut placed = Vec::new();
    let amplitude = spec.burst.amplitude_mv * amplitude_factor;
    for (k, seg) in annotations.iter().enumerate() {
        if seg.label == Task::Baseline || spec.burst.count == 0 {
            continue;
        }
        // One burst per equal slot keeps them disjoint and inside the segment.
        let slot = seg.duration_s / spec.burst.count as f64;
        for j in 0..spec.burst.count {
            let slack = slot - spec.burst.duration_s;
            let start_s = seg.start_s + j as f64 * slot + slack * rng.random::<f64>();
            let start = (start_s * rate).ceil() as usize;
            let len =
                ((spec.burst.duration_s * rate).floor() as usize).min(n.saturating_sub(start));
            let end_limit = (seg.end_s() * rate).floor() as usize;
            let len = len.min(end_limit.saturating_sub(start));
            let shape = band_limited_burst(len, rate, spec.burst.band_hz, amplitude, &mut rng);
            for (dst, s) in bursts[start..start + len].iter_mut().zip(&shape) {
                *dst += s;
            }
            placed.push(BurstTruth {
                segment: k,
                start_s: start as f64 / rate,
                duration_s: len as f64 / rate,
            });
        }
    }

    let sigma = spec.noise.white_sigma_mv * noise_factor;
    let channels = (0..spec.n_channels)
        .map(|c| {
            let gain = spec.channel_gain(c);
            let series = common
                .iter()
                .zip(&bursts)
                .map(|(&base, &b)| base + gain * b + sigma * gauss(&mut rng))
                .collect();
            (format!("ch{}", c + 1), series)
        })
        .collect();

    let id = participant_id(index);
    Ok(Synthetic {
        recording: Recording::new(id.clone(), rate, channels)?,
        annotations,
        truth: ParticipantTruth {
            participant_id: id,
            index,
            heart_rate_bpm: heart_rate,
            amplitude_factor,
            noise_factor,
            mains_phase,
            bursts: placed,
        },
    })
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn add_qrs_train(out: &mut [f64], spec: &SynthSpec, heart_rate: f64, rng: &mut ChaCha8Rng) {
    let rate = spec.native_rate_hz;
    let sigma = spec.qrs_width_ms / 1000.0;
    let half = (6.0 * sigma * rate).ceil() as isize;
    let rr = 60.0 / heart_rate;
    let mut t = rr * rng.random::<f64>();
    let n = out.len() as isize;
    while (t * rate) as isize - half < n {
        let centre = (t * rate).round() as isize;
        for k in -half..=half {
            let i = centre + k;
            if (0..n).contains(&i) {
                let u = k as f64 / (sigma * rate);
                // Gaussian derivative scaled to peak at the QRS amplitude.
                out[i as usize] += spec.qrs_amplitude_mv * u * (0.5 - 0.5 * u * u).exp();
            }
        }
        t += (rr * (1.0 + spec.rr_variability * gauss(rng))).max(0.3 * rr);
    }
}

/// Unit-RMS white noise restricted to `band` in the frequency domain.
fn band_limited_noise(
    len: usize,
    rate: f64,
    (lo, hi): (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..len).map(|_| Complex::new(gauss(rng), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let df = rate / len as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(len - k) as f64 * df;
        if !(lo..=hi).contains(&f) {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut out: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    normalize_rms(&mut out, 1.0);
    out
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    let scale = if rms > 0.0 { target / rms } else { 0.0 };
    x.iter_mut().for_each(|v| *v *= scale);
}

/// Band-limited noise under a Hann envelope, scaled to RMS `amplitude`
/// over the burst.
fn band_limited_burst(
    len: usize,
    rate: f64,
    band: (f64, f64),
    amplitude: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    if len < 2 {
        return vec![0.0; len];
    }
    let mut out = band_limited_noise(len, rate, band, rng);
    let w = std::f64::consts::PI / (len - 1) as f64;
    for (i, v) in out.iter_mut().enumerate() {
        *v *= (w * i as f64).sin().powi(2);
    }
    normalize_rms(&mut out, amplitude);
    out
}

/// Files written for a cohort.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortFiles {
    pub recordings: Vec<PathBuf>,
    pub annotations: Vec<PathBuf>,
    pub ground_truth: PathBuf,
}

pub fn annotation_path(dir: &Path, participant_id: &str) -> PathBuf {
    dir.join(format!("{participant_id}_annotations.csv"))
}

/// Generates the cohort one participant at a time and writes a recording,
/// an annotation CSV and finally `ground_truth.json` into `dir`.
pub fn write_cohort(spec: &SynthSpec, dir: &Path, format: RecordingFormat) -> Result<CohortFiles> {
    spec.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| SknaError::io(dir, e))?;
    let mut files = CohortFiles {
        recordings: Vec::new(),
        annotations: Vec::new(),
        ground_truth: dir.join("ground_truth.json"),
    };
    let mut truths = Vec::new();
    for i in 0..spec.n_participants {
        let s = generate_participant(spec, &spec.jitter, i)?;
        let id = s.recording.participant_id().to_string();
        let rec_path = dir.join(format!("{id}.{}", format.extension()));
        save_recording(&s.recording, &rec_path, format)?;
        let ann_path = annotation_path(dir, &id);
        save_annotations(&s.annotations, &ann_path)?;
        files.recordings.push(rec_path);
        files.annotations.push(ann_path);
        truths.push(s.truth);
    }
    #[derive(Serialize)]
    struct GroundTruth<'a> {
        spec: &'a SynthSpec,
        participants: &'a [ParticipantTruth],
    }
    let json = serde_json::to_string_pretty(&GroundTruth {
        spec,
        participants: &truths,
    })
    .expect("ground truth serializes");
    write_atomic(&files.ground_truth, |w| {
        use std::io::Write;
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")
    })?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec {
            native_rate_hz: 4000.0,
            n_participants: 2,
            plan: vec![
                SegmentAnnotation::new(Task::Baseline, 1.0, 10.0, None).unwrap(),
                SegmentAnnotation::new(Task::Tg, 16.0, 10.0, Some(5.0)).unwrap(),
            ],
            ..Default::default()
        }
    }

    #[test]
    fn standard_plan_is_valid() {
        let spec = SynthSpec::default();
        spec.validate().unwrap();
        assert_eq!(spec.plan.len(), 14);
        assert_eq!(spec.duration(), 515.0);
    }

    #[test]
    fn overlapping_plan_rejected() {
        let mut spec = small();
        spec.plan[1].start_s = 5.0;
        assert!(matches!(spec.validate(), Err(SknaError::Config(_))));
    }

    #[test]
    fn band_outside_nyquist_rejected() {
        let mut spec = small();
        spec.burst.band_hz = (150.0, 2500.0);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn bursts_stay_inside_task_segments() {
        let s = generate(&small()).unwrap();
        assert_eq!(s.truth.bursts.len(), 4);
        for b in &s.truth.bursts {
            let seg = &s.annotations[b.segment];
            assert_eq!(seg.label, Task::Tg);
            assert!(b.start_s >= seg.start_s && b.start_s + b.duration_s <= seg.end_s() + 1e-9);
        }
    }

    #[test]
    fn deterministic_and_distinct_streams() {
        let spec = small();
        let a = generate_participant(&spec, &spec.jitter, 1).unwrap();
        let b = generate_participant(&spec, &spec.jitter, 1).unwrap();
        let c = generate_participant(&spec, &spec.jitter, 0).unwrap();
        assert_eq!(a.recording, b.recording);
        assert_ne!(a.recording, c.recording);
    }

    #[test]
    fn toml_round_trip() {
        let spec = SynthSpec::default();
        let back = SynthSpec::from_toml(&spec.to_toml()).unwrap();
        assert_eq!(back, spec);
        assert!(SynthSpec::from_toml("n_participants = 'x'").is_err());
        assert!(SynthSpec::from_toml("bogus = 1").is_err());
    }
}
