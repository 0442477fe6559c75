//! Multichannel ECG recordings and their segment annotations.
//!
//! Two on-disk signal formats:
//!
//! * CSV: a header line `rate=<float>;channels=<name,...>` (optionally
//!   followed by `;participant=<id>`), then one comma-separated row per
//!   sample, one column per channel.
//! * Binary: per channel a little-endian `u64` sample count followed by that
//!   many little-endian `f64` values. Rate, channel names and participant id
//!   live in a JSON sidecar next to it (`<file>.json`).
//!
//! Both round-trip bit-exactly.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::SampleSeries;
use crate::error::{Result, SknaError};
use crate::fsio::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    Baseline,
    #[serde(rename = "VM")]
    Vm,
    #[serde(rename = "ST")]
    St,
    #[serde(rename = "TG")]
    Tg,
}

impl Task {
    /// The three stimulation tasks, in reporting order.
    pub const STIMULI: [Task; 3] = [Task::Vm, Task::St, Task::Tg];

    /// Standard segment length: Valsalva 30 s, Stroop 120 s, thermal grill 10 s.
    pub fn default_duration_s(self) -> Option<f64> {
        match self {
            Task::Baseline => None,
            Task::Vm => Some(30.0),
            Task::St => Some(120.0),
            Task::Tg => Some(10.0),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Baseline => "Baseline",
            Task::Vm => "VM",
            Task::St => "ST",
            Task::Tg => "TG",
        })
    }
}

impl FromStr for Task {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BASELINE" => Ok(Task::Baseline),
            "VM" => Ok(Task::Vm),
            "ST" => Ok(Task::St),
            "TG" => Ok(Task::Tg),
            other => Err(SknaError::format(format!("unknown task label '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentAnnotation {
    pub label: Task,
    pub start_s: f64,
    pub duration_s: f64,
    pub vas: Option<f64>,
}

impl SegmentAnnotation {
    pub fn new(label: Task, start_s: f64, duration_s: f64, vas: Option<f64>) -> Result<Self> {
        if !(start_s.is_finite() && start_s >= 0.0) {
            return Err(SknaError::format(format!(
                "segment start {start_s} must be >= 0"
            )));
        }
        if !(duration_s.is_finite() && duration_s > 0.0) {
            return Err(SknaError::format(format!(
                "segment duration {duration_s} must be > 0"
            )));
        }
        match (label, vas) {
            (Task::Tg, None) => return Err(SknaError::format("TG segment without a VAS score")),
            (Task::Tg, Some(v)) if !(0.0..=10.0).contains(&v) => {
                return Err(SknaError::format(format!("VAS {v} outside 0-10")))
            }
            (Task::Tg, Some(_)) | (_, None) => {}
            (other, Some(_)) => {
                return Err(SknaError::format(format!(
                    "VAS given for a {other} segment"
                )))
            }
        }
        Ok(Self {
            label,
            start_s,
            duration_s,
            vas,
        })
    }

    /// A stimulus segment of the task's standard length.
    pub fn standard(label: Task, start_s: f64, vas: Option<f64>) -> Result<Self> {
        let duration = label
            .default_duration_s()
            .ok_or_else(|| SknaError::config("baseline segments have no standard length"))?;
        Self::new(label, start_s, duration, vas)
    }

    pub fn end_s(&self) -> f64 {
        self.start_s + self.duration_s
    }
}

#[derive(Debug, Deserialize)]
struct AnnotationRow {
    label: String,
    start_s: f64,
    duration_s: f64,
    vas: Option<f64>,
}

fn parse_annotations<R: Read>(input: R) -> Result<Vec<SegmentAnnotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| SknaError::format(e.to_string()))?
        .clone();
    let expected = ["label", "start_s", "duration_s", "vas"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(SknaError::format(format!(
            "annotation header must be '{}'",
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<AnnotationRow>().enumerate() {
        let row = row.map_err(|e| SknaError::format(format!("annotation row {}: {e}", i + 1)))?;
        let ann = SegmentAnnotation::new(row.label.parse()?, row.start_s, row.duration_s, row.vas)
            .map_err(|e| SknaError::format(format!("annotation row {}: {e}", i + 1)))?;
        out.push(ann);
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok(out)
}

/// Reads `label,start_s,duration_s,vas` rows, sorted by start time.
pub fn load_annotations(path: &Path) -> Result<Vec<SegmentAnnotation>> {
    let file = std::fs::File::open(path).map_err(|e| SknaError::io(path, e))?;
    parse_annotations(BufReader::new(file))
}

pub fn write_annotations<W: Write>(anns: &[SegmentAnnotation], mut out: W) -> std::io::Result<()> {
    writeln!(out, "label,start_s,duration_s,vas")?;
    for a in anns {
        let vas = a.vas.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{}", a.label, a.start_s, a.duration_s, vas)?;
    }
    Ok(())
}

pub fn save_annotations(anns: &[SegmentAnnotation], path: &Path) -> Result<()> {
    write_atomic(path, |w| write_annotations(anns, w))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub series: SampleSeries,
}

/// Equal-length named channels at one sampling rate, amplitudes in mV.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    participant_id: String,
    rate: f64,
    channels: Vec<Channel>,
}

impl Recording {
    pub fn new(
        participant_id: impl Into<String>,
        rate: f64,
        channels: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let len = channels.first().map(|c| c.1.len()).unwrap_or(0);
        let mut built = Vec::with_capacity(channels.len());
        for (name, samples) in channels {
            if samples.len() != len {
                return Err(SknaError::data(format!(
                    "channel '{name}' has {} samples, expected {len}",
                    samples.len()
                )));
            }
            built.push(Channel {
                series: SampleSeries::new(samples, rate)?,
                name,
            });
        }
        crate::dsp::check_rate(rate)?;
        Ok(Self {
            participant_id: participant_id.into(),
            rate,
            channels: built,
        })
    }

    pub fn participant_id(&self) -> &str {
        &self.participant_id
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> Option<&Channel> {
        self.channels.get(i)
    }

    pub fn len(&self) -> usize {
        self.channels.first().map(|c| c.series.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.rate
    }

    /// Checks that `ann` lies inside the recording.
    pub fn check_annotation(&self, ann: &SegmentAnnotation) -> Result<()> {
        let eps = 0.5 / self.rate;
        if ann.end_s() > self.duration_s() + eps {
            return Err(SknaError::data(format!(
                "{} segment {}-{} s exceeds recording length {} s",
                ann.label,
                ann.start_s,
                ann.end_s(),
                self.duration_s()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordingFormat {
    Csv,
    RawBinary,
}

impl RecordingFormat {
    /// `.bin` means binary, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("bin") => RecordingFormat::RawBinary,
            _ => RecordingFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            RecordingFormat::Csv => "csv",
            RecordingFormat::RawBinary => "bin",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    participant_id: String,
    rate_hz: f64,
    channels: Vec<String>,
}

/// Path of the JSON descriptor that accompanies a binary recording.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".json");
    path.with_file_name(name)
}

fn stem_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn load_recording(path: &Path, format: RecordingFormat) -> Result<Recording> {
    match format {
        RecordingFormat::Csv => {
            let file = std::fs::File::open(path).map_err(|e| SknaError::io(path, e))?;
            read_csv(BufReader::new(file), &stem_id(path))
        }
        RecordingFormat::RawBinary => {
            let side = sidecar_path(path);
            let meta: Sidecar = serde_json::from_str(&crate::fsio::read_to_string(&side)?)
                .map_err(|e| SknaError::format(format!("{}: {e}", side.display())))?;
            let bytes = std::fs::read(path).map_err(|e| SknaError::io(path, e))?;
            read_binary(&bytes, meta)
        }
    }
}

pub fn save_recording(rec: &Recording, path: &Path, format: RecordingFormat) -> Result<()> {
    if rec.channels.is_empty() || rec.is_empty() {
        return Err(SknaError::format(
            "refusing to save a recording with no samples",
        ));
    }
    match format {
        RecordingFormat::Csv => write_atomic(path, |w| write_csv(rec, w)),
        RecordingFormat::RawBinary => {
            let meta = Sidecar {
                participant_id: rec.participant_id.clone(),
                rate_hz: rec.rate,
                channels: rec.channels.iter().map(|c| c.name.clone()).collect(),
            };
            write_atomic(path, |w| {
                for c in &rec.channels {
                    w.write_all(&(c.series.len() as u64).to_le_bytes())?;
                    for v in c.series.samples() {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                Ok(())
            })?;
            write_atomic(&sidecar_path(path), |w| {
                serde_json::to_writer_pretty(&mut *w, &meta)?;
                writeln!(w)
            })
        }
    }
}

fn write_csv<W: Write>(rec: &Recording, mut out: W) -> std::io::Result<()> {
    let names: Vec<&str> = rec.channels.iter().map(|c| c.name.as_str()).collect();
    writeln!(
        out,
        "rate={};channels={};participant={}",
        rec.rate,
        names.join(","),
        rec.participant_id
    )?;
    for i in 0..rec.len() {
        for (k, c) in rec.channels.iter().enumerate() {
            if k > 0 {
                out.write_all(b",")?;
            }
            write!(out, "{}", c.series.samples()[i])?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

struct Header {
    rate: f64,
    channels: Vec<String>,
    participant: Option<String>,
}

fn parse_header(line: &str) -> Result<Header> {
    let (mut rate, mut channels, mut participant) = (None, None, None);
    for field in line.trim().split(';') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| SknaError::format(format!("header field '{field}' is not key=value")))?;
        match key.trim() {
            "rate" => {
                rate = Some(value.trim().parse::<f64>().map_err(|_| {
                    SknaError::format(format!("header rate '{value}' is not a number"))
                })?)
            }
            "channels" => {
                channels = Some(
                    value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .collect::<Vec<_>>(),
                )
            }
            "participant" => participant = Some(value.trim().to_string()),
            other => return Err(SknaError::format(format!("unknown header key '{other}'"))),
        }
    }
    let rate = rate.ok_or_else(|| SknaError::format("header lacks rate="))?;
    let channels = channels.ok_or_else(|| SknaError::format("header lacks channels="))?;
    if channels.iter().any(|c| c.is_empty()) {
        return Err(SknaError::format("empty channel name in header"));
    }
    Ok(Header {
        rate,
        channels,
        participant,
    })
}

fn read_csv<R: BufRead>(mut input: R, default_id: &str) -> Result<Recording> {
    let mut line = String::new();
    let io_err = |e| SknaError::Format(format!("read failed: {e}"));
    if input.read_line(&mut line).map_err(io_err)? == 0 || !line.trim_start().starts_with("rate=") {
        return Err(SknaError::format("missing 'rate=...;channels=...' header"));
    }
    let header = parse_header(&line)?;
    let width = header.channels.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut row = 0usize;
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(io_err)? == 0 {
            break;
        }
        let text = line.trim_end();
        if text.is_empty() {
            continue;
        }
        let mut n = 0;
        for (k, cell) in text.split(',').enumerate() {
            if k >= width {
                return Err(SknaError::data_at(
                    format!("row has more than {width} values"),
                    row,
                ));
            }
            let v: f64 = cell.trim().parse().map_err(|_| {
                SknaError::format(format!("row {row}: '{}' is not a number", cell.trim()))
            })?;
            if !v.is_finite() {
                return Err(SknaError::data_at("non-finite sample", row));
            }
            columns[k].push(v);
            n += 1;
        }
        if n != width {
            return Err(SknaError::data_at(
                format!("row has {n} values, expected {width}"),
                row,
            ));
        }
        row += 1;
    }
    if row == 0 {
        return Err(SknaError::format("recording has no samples"));
    }
    let id = header.participant.unwrap_or_else(|| default_id.to_string());
    Recording::new(
        id,
        header.rate,
        header.channels.into_iter().zip(columns).collect(),
    )
}

fn read_binary(bytes: &[u8], meta: Sidecar) -> Result<Recording> {
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let chunk = bytes
            .get(pos..pos + n)
            .ok_or_else(|| SknaError::format("binary recording is truncated"))?;
        pos += n;
        Ok(chunk)
    };
    let mut channels = Vec::with_capacity(meta.channels.len());
    for name in &meta.channels {
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let raw = take(
            count
                .checked_mul(8)
                .ok_or_else(|| SknaError::format("bad length prefix"))?,
        )?;
        let samples: Vec<f64> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        channels.push((name.clone(), samples));
    }
    if pos != bytes.len() {
        return Err(SknaError::format(
            "trailing bytes after the declared channels",
        ));
    }
    if channels.iter().all(|c| c.1.is_empty()) {
        return Err(SknaError::format("recording has no samples"));
    }
    Recording::new(meta.participant_id, meta.rate_hz, channels)
}
