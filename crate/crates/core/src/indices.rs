//! Per-segment summary indices (maximum, mean, standard deviation) and the
//! index table that feeds the statistics.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::SampleSeries;
use crate::error::{Result, SknaError};
use crate::fsio::write_atomic;
use crate::pipeline::{compute_kinds, PipelineConfig, SknaKind};
use crate::provenance::digest;
use crate::recording::{Recording, SegmentAnnotation, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    Baseline,
    Task,
    #[serde(rename = "CSPminus")]
    CspMinus,
    #[serde(rename = "CSPplus")]
    CspPlus,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Baseline => "Baseline",
            Condition::Task => "Task",
            Condition::CspMinus => "CSPminus",
            Condition::CspPlus => "CSPplus",
        })
    }
}

impl FromStr for Condition {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Baseline" => Ok(Condition::Baseline),
            "Task" => Ok(Condition::Task),
            "CSPminus" => Ok(Condition::CspMinus),
            "CSPplus" => Ok(Condition::CspPlus),
            other => Err(SknaError::format(format!("unknown condition '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Max,
    Mean,
    Sd,
}

impl IndexKind {
    pub const ALL: [IndexKind; 3] = [IndexKind::Max, IndexKind::Mean, IndexKind::Sd];

    pub fn label(self) -> &'static str {
        match self {
            IndexKind::Max => "Max",
            IndexKind::Mean => "Mean",
            IndexKind::Sd => "S.D.",
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexKind::Max => "max",
            IndexKind::Mean => "mean",
            IndexKind::Sd => "sd",
        })
    }
}

impl FromStr for IndexKind {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "max" => Ok(IndexKind::Max),
            "mean" => Ok(IndexKind::Mean),
            "sd" => Ok(IndexKind::Sd),
            other => Err(SknaError::config(format!("unknown index '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentIndices {
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl SegmentIndices {
    pub fn get(&self, kind: IndexKind) -> f64 {
        match kind {
            IndexKind::Max => self.max,
            IndexKind::Mean => self.mean,
            IndexKind::Sd => self.sd,
        }
    }
}

/// Samples in `[start, start + duration)`, with both ends rounded to the
/// nearest sample.
pub fn slice_segment(s: &SampleSeries, ann: &SegmentAnnotation) -> Result<SampleSeries> {
    let rate = s.rate();
    let start = (ann.start_s * rate).round() as usize;
    let len = (ann.duration_s * rate).round() as usize;
    if start + len > s.len() {
        return Err(SknaError::data(format!(
            "{} segment {}-{} s exceeds the {} s series",
            ann.label,
            ann.start_s,
            ann.end_s(),
            s.duration_s()
        )));
    }
    SampleSeries::new(s.samples()[start..start + len].to_vec(), rate)
}

/// Maximum, mean and population standard deviation (two-pass).
pub fn compute_indices(seg: &[f64]) -> Result<SegmentIndices> {
    if seg.is_empty() {
        return Err(SknaError::data("cannot summarize an empty segment"));
    }
    if let Some(i) = seg.iter().position(|v| !v.is_finite()) {
        return Err(SknaError::data_at("non-finite", i));
    }
    let n = seg.len() as f64;
    let mean = seg.iter().sum::<f64>() / n;
    let var = seg.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SegmentIndices {
        max,
        mean,
        sd: var.sqrt(),
    })
}

/// Pain category of a thermal-grill segment: VAS in (0, 4) is CSP-, VAS >= 4
/// is CSP+, and VAS 0 belongs to neither.
pub fn categorize_tg(ann: &SegmentAnnotation) -> Result<Condition> {
    if ann.label != Task::Tg {
        return Err(SknaError::data(format!(
            "{} segment has no pain category",
            ann.label
        )));
    }
    match ann.vas {
        None => Err(SknaError::data("TG segment without a VAS score")),
        Some(v) if v >= 4.0 => Ok(Condition::CspPlus),
        Some(v) if v > 0.0 => Ok(Condition::CspMinus),
        Some(v) => Err(SknaError::ExcludedSegment(format!(
            "VAS {v} is outside both pain categories"
        ))),
    }
}

/// Where each stimulus's baseline comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePolicy {
    /// Pause between the end of a derived baseline and the stimulus onset.
    pub gap_s: f64,
    /// Use an annotated `Baseline` segment ending at or before the onset when
    /// one exists; otherwise derive an equal-length pre-stimulus window.
    pub use_annotated: bool,
}

impl Default for BaselinePolicy {
    fn default() -> Self {
        Self {
            gap_s: 5.0,
            use_annotated: true,
        }
    }
}

impl BaselinePolicy {
    pub fn describe(&self) -> String {
        format!(
            "baseline: {}equal-length window ending {} s before each stimulus onset",
            if self.use_annotated {
                "annotated Baseline segment if present, else "
            } else {
                ""
            },
            self.gap_s
        )
    }
}

/// Identifier of the baseline paired with stimulus `stimulus_id`.
pub fn baseline_id(stimulus_id: &str) -> String {
    format!("{stimulus_id}-baseline")
}

/// The stimulus a baseline segment id belongs to.
pub fn stimulus_of(segment_id: &str) -> Option<&str> {
    segment_id.strip_suffix("-baseline")
}

/// One window to summarize, independent of channel, rate and kind.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedSegment {
    pub task: Task,
    pub condition: Condition,
    pub segment_id: String,
    pub window: SegmentAnnotation,
}

/// A stimulus/baseline pair dropped before any signal is touched.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanExclusion {
    pub task: Task,
    pub segment_id: String,
    pub reason: String,
}

/// Pairs every stimulus with its baseline. Stimuli are numbered per task in
/// time order (`VM1`, `VM2`, `TG1`, ...).
pub fn plan_segments(
    anns: &[SegmentAnnotation],
    duration_s: f64,
    rate: f64,
    policy: &BaselinePolicy,
) -> (Vec<PlannedSegment>, Vec<PlanExclusion>) {
    let mut sorted: Vec<&SegmentAnnotation> = anns.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let baselines: Vec<&SegmentAnnotation> = sorted
        .iter()
        .copied()
        .filter(|a| a.label == Task::Baseline)
        .collect();
    let eps = 0.5 / rate;
    let mut counters: BTreeMap<Task, usize> = BTreeMap::new();
    let (mut plan, mut excluded) = (Vec::new(), Vec::new());

    for stim in sorted.iter().filter(|a| a.label != Task::Baseline) {
        let k = counters.entry(stim.label).or_insert(0);
        *k += 1;
        let id = format!("{}{}", stim.label, k);
        let mut exclude = |reason: String| {
            excluded.push(PlanExclusion {
                task: stim.label,
                segment_id: id.clone(),
                reason,
            })
        };
        let condition = match stim.label {
            Task::Tg => match categorize_tg(stim) {
                Ok(c) => c,
                Err(e) => {
                    exclude(e.to_string());
                    continue;
                }
            },
            _ => Condition::Task,
        };
        let annotated = policy
            .use_annotated
            .then(|| {
                baselines
                    .iter()
                    .rev()
                    .find(|b| b.end_s() <= stim.start_s + eps)
            })
            .flatten();
        let base = match annotated {
            Some(b) => **b,
            None => {
                let start = stim.start_s - policy.gap_s - stim.duration_s;
                if start < -eps {
                    exclude("baseline window starts before the recording".into());
                    continue;
                }
                SegmentAnnotation {
                    label: Task::Baseline,
                    start_s: start.max(0.0),
                    duration_s: stim.duration_s,
                    vas: None,
                }
            }
        };
        if stim.end_s() > duration_s + eps || base.end_s() > duration_s + eps {
            exclude("segment extends past the end of the recording".into());
            continue;
        }
        plan.push(PlannedSegment {
            task: stim.label,
            condition: Condition::Baseline,
            segment_id: baseline_id(&id),
            window: base,
        });
        plan.push(PlannedSegment {
            task: stim.label,
            condition,
            segment_id: id,
            window: **stim,
        });
    }
    (plan, excluded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub participant: String,
    /// 1-based channel number.
    pub channel: usize,
    pub rate: f64,
    pub kind: SknaKind,
    pub task: Task,
    pub condition: Condition,
    pub segment_id: String,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

impl IndexRecord {
    pub fn value(&self, index: IndexKind) -> f64 {
        match index {
            IndexKind::Max => self.max,
            IndexKind::Mean => self.mean,
            IndexKind::Sd => self.sd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant: String,
    pub channel: Option<usize>,
    pub rate: Option<f64>,
    pub kind: Option<SknaKind>,
    pub task: Task,
    pub segment_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndexTable {
    pub rows: Vec<IndexRecord>,
    pub excluded: Vec<Exclusion>,
    /// Digest of the pipeline configs, kinds and baseline policy.
    pub provenance: String,
}

const TABLE_HEADER: &str = "participant,channel,rate,kind,task,condition,segment_id,max,mean,sd";
const EXCLUSION_HEADER: &str = "participant,channel,rate,kind,task,segment_id,reason";

impl IndexTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends another participant's rows.
    pub fn extend(&mut self, other: IndexTable) {
        self.rows.extend(other.rows);
        self.excluded.extend(other.excluded);
        if self.provenance.is_empty() {
            self.provenance = other.provenance;
        }
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.rows {
            let key = (
                &r.participant,
                r.channel,
                r.rate.to_bits(),
                r.kind,
                r.task,
                &r.segment_id,
            );
            if !seen.insert(key) {
                return Err(SknaError::data(format!(
                    "duplicate row for participant {} channel {} rate {} {} {} {}",
                    r.participant, r.channel, r.rate, r.kind, r.task, r.segment_id
                )));
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{TABLE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.participant,
                r.channel,
                r.rate,
                r.kind,
                r.task,
                r.condition,
                r.segment_id,
                r.max,
                r.mean,
                r.sd
            )?;
        }
        Ok(())
    }

    pub fn write_exclusions_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{EXCLUSION_HEADER}")?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for e in &self.excluded {
            writeln!(
                out,
                "{},{},{},{},{},{},\"{}\"",
                e.participant,
                opt(e.channel.map(|c| c.to_string())),
                opt(e.rate.map(|r| r.to_string())),
                opt(e.kind.map(|k| k.to_string())),
                e.task,
                e.segment_id,
                e.reason.replace('"', "'")
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| self.write_csv(w))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<IndexTable> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| SknaError::format(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if headers != TABLE_HEADER {
            return Err(SknaError::format(format!(
                "index table header must be '{TABLE_HEADER}'"
            )));
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| SknaError::format(format!("row {}: {e}", i + 1)))?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let num = |k: usize| -> Result<f64> {
                field(k).parse::<f64>().map_err(|_| {
                    SknaError::format(format!("row {}: '{}' is not a number", i + 1, field(k)))
                })
            };
            let task: Task = field(4).parse()?;
            rows.push(IndexRecord {
                participant: field(0).to_string(),
                channel: field(1)
                    .parse()
                    .map_err(|_| SknaError::format(format!("row {}: bad channel", i + 1)))?,
                rate: num(2)?,
                kind: field(3)
                    .parse()
                    .map_err(|e: SknaError| SknaError::format(e.to_string()))?,
                task,
                condition: field(5).parse()?,
                segment_id: field(6).to_string(),
                max: num(7)?,
                mean: num(8)?,
                sd: num(9)?,
            });
        }
        let table = IndexTable {
            rows,
            excluded: Vec::new(),
            provenance: String::new(),
        };
        table.check_unique()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<IndexTable> {
        let file = std::fs::File::open(path).map_err(|e| SknaError::io(path, e))?;
        let mut t = Self::read_csv(std::io::BufReader::new(file))?;
        t.provenance = crate::provenance::digest_bytes(
            &std::fs::read(path).map_err(|e| SknaError::io(path, e))?,
        );
        Ok(t)
    }
}

#[derive(Serialize)]
struct TableProvenance<'a> {
    configs: &'a [PipelineConfig],
    kinds: &'a [SknaKind],
    baseline: &'a BaselinePolicy,
}

pub fn table_digest(
    configs: &[PipelineConfig],
    kinds: &[SknaKind],
    policy: &BaselinePolicy,
) -> String {
    digest(&TableProvenance {
        configs,
        kinds,
        baseline: policy,
    })
}

/// Index rows for one participant: every planned segment on every channel,
/// rate and kind. Segments that cannot be summarized become exclusions.
pub fn participant_rows(
    rec: &Recording,
    anns: &[SegmentAnnotation],
    configs: &[PipelineConfig],
    kinds: &[SknaKind],
    policy: &BaselinePolicy,
) -> Result<IndexTable> {
    let pid = rec.participant_id().to_string();
    let (plan, plan_excluded) = plan_segments(anns, rec.duration_s(), rec.rate(), policy);
    let mut table = IndexTable {
        provenance: table_digest(configs, kinds, policy),
        ..Default::default()
    };
    table
        .excluded
        .extend(plan_excluded.into_iter().map(|e| Exclusion {
            participant: pid.clone(),
            channel: None,
            rate: None,
            kind: None,
            task: e.task,
            segment_id: e.segment_id,
            reason: e.reason,
        }));
    if plan.is_empty() {
        return Ok(table);
    }
    for (ci, channel) in rec.channels().iter().enumerate() {
        for cfg in configs {
            let series = compute_kinds(&channel.series, cfg, kinds)?;
            for s in &series {
                for seg in &plan {
                    let summary = slice_segment(&s.series, &seg.window)
                        .and_then(|x| compute_indices(x.samples()));
                    match summary {
                        Ok(ix) => table.rows.push(IndexRecord {
                            participant: pid.clone(),
                            channel: ci + 1,
                            rate: cfg.target_rate_hz,
                            kind: s.kind,
                            task: seg.task,
                            condition: seg.condition,
                            segment_id: seg.segment_id.clone(),
                            max: ix.max,
                            mean: ix.mean,
                            sd: ix.sd,
                        }),
                        Err(e) => table.excluded.push(Exclusion {
                            participant: pid.clone(),
                            channel: Some(ci + 1),
                            rate: Some(cfg.target_rate_hz),
                            kind: Some(s.kind),
                            task: seg.task,
                            segment_id: seg.segment_id.clone(),
                            reason: match e {
                                SknaError::Data { ref message, .. } if message == "non-finite" => {
                                    "non-finite".into()
                                }
                                other => other.to_string(),
                            },
                        }),
                    }
                }
            }
        }
    }
    Ok(table)
}

/// Index rows for a set of participants.
pub fn build_index_table(
    subjects: &[(Recording, Vec<SegmentAnnotation>)],
    configs: &[PipelineConfig],
    kinds: &[SknaKind],
    policy: &BaselinePolicy,
) -> Result<IndexTable> {
    build_index_table_with(
        subjects.len(),
        |i| Ok(subjects[i].clone()),
        configs,
        kinds,
        policy,
    )
}

/// Like [`build_index_table`], but each participant is produced on demand by
/// `load(i)` for `i` in `0..n`, so only a few recordings are in memory at a
/// time. Participants run in parallel; row order follows `i`.
pub fn build_index_table_with<F>(
    n: usize,
    load: F,
    configs: &[PipelineConfig],
    kinds: &[SknaKind],
    policy: &BaselinePolicy,
) -> Result<IndexTable>
where
    F: Fn(usize) -> Result<(Recording, Vec<SegmentAnnotation>)> + Sync,
{
    let parts = (0..n)
        .into_par_iter()
        .map(|i| {
            let (rec, anns) = load(i)?;
            participant_rows(&rec, &anns, configs, kinds, policy)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = IndexTable {
        provenance: table_digest(configs, kinds, policy),
        ..Default::default()
    };
    for part in parts {
        table.extend(part);
    }
    table.check_unique()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(label: Task, start: f64, dur: f64, vas: Option<f64>) -> SegmentAnnotation {
        SegmentAnnotation::new(label, start, dur, vas).unwrap()
    }

    #[test]
    fn hand_computed_indices() {
        let ix = compute_indices(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((ix.max, ix.mean), (4.0, 2.5));
        assert!((ix.sd - 1.25f64.sqrt()).abs() < 1e-15);
        let c = compute_indices(&[7.5; 9]).unwrap();
        assert_eq!((c.max, c.mean, c.sd), (7.5, 7.5, 0.0));
        assert!(compute_indices(&[]).is_err());
    }

    #[test]
    fn slicing_bounds_and_lengths() {
        let s = SampleSeries::new(vec![0.0; 5000], 500.0).unwrap();
        assert!(slice_segment(&s, &ann(Task::Vm, 2.0, 10.0, None)).is_err());
        let s = SampleSeries::new((0..20_000).map(|i| i as f64).collect(), 1000.0).unwrap();
        let seg = slice_segment(&s, &ann(Task::Tg, 1.0, 10.0, Some(5.0))).unwrap();
        assert_eq!(seg.len(), 10_000);
        assert_eq!(seg.samples()[0], 1000.0);
        let full = slice_segment(&s, &ann(Task::Baseline, 0.0, 20.0, None)).unwrap();
        assert_eq!(full, s);
    }

    #[test]
    fn pain_categories() {
        assert_eq!(
            categorize_tg(&ann(Task::Tg, 0.0, 10.0, Some(6.0))).unwrap(),
            Condition::CspPlus
        );
        assert_eq!(
            categorize_tg(&ann(Task::Tg, 0.0, 10.0, Some(3.5))).unwrap(),
            Condition::CspMinus
        );
        assert_eq!(
            categorize_tg(&ann(Task::Tg, 0.0, 10.0, Some(4.0))).unwrap(),
            Condition::CspPlus
        );
        assert!(matches!(
            categorize_tg(&ann(Task::Tg, 0.0, 10.0, Some(0.0))),
            Err(SknaError::ExcludedSegment(_))
        ));
        assert!(matches!(
            categorize_tg(&ann(Task::Vm, 0.0, 30.0, None)),
            Err(SknaError::Data { .. })
        ));
    }

    #[test]
    fn derived_baseline_precedes_with_gap() {
        let anns = [ann(Task::Vm, 100.0, 30.0, None)];
        let (plan, ex) = plan_segments(&anns, 200.0, 1000.0, &BaselinePolicy::default());
        assert!(ex.is_empty());
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[0].segment_id, "VM1-baseline");
        assert_eq!(plan[0].window.start_s, 65.0);
        assert_eq!(plan[0].window.duration_s, 30.0);
        assert_eq!(stimulus_of(&plan[0].segment_id), Some("VM1"));
        assert_eq!(plan[1].condition, Condition::Task);
    }

    #[test]
    fn annotated_baseline_is_preferred() {
        let anns = [
            ann(Task::Baseline, 10.0, 60.0, None),
            ann(Task::St, 80.0, 120.0, None),
        ];
        let (plan, _) = plan_segments(&anns, 300.0, 1000.0, &BaselinePolicy::default());
        assert_eq!(plan[0].window.start_s, 10.0);
        assert_eq!(plan[0].window.duration_s, 60.0);
        let policy = BaselinePolicy {
            use_annotated: false,
            ..Default::default()
        };
        let (_, ex) = plan_segments(&anns, 300.0, 1000.0, &policy);
        assert_eq!(ex.len(), 1, "derived ST baseline would start before 0");
    }

    #[test]
    fn vas_zero_and_overrun_are_excluded() {
        let anns = [
            ann(Task::Tg, 20.0, 10.0, Some(0.0)),
            ann(Task::Tg, 40.0, 10.0, Some(2.0)),
            ann(Task::Tg, 95.0, 10.0, Some(7.0)),
        ];
        let (plan, ex) = plan_segments(&anns, 100.0, 1000.0, &BaselinePolicy::default());
        assert_eq!(plan.len(), 2);
        assert_eq!(plan[1].condition, Condition::CspMinus);
        assert_eq!(plan[1].segment_id, "TG2");
        assert_eq!(ex.len(), 2);
    }

    #[test]
    fn csv_round_trip() {
        let table = IndexTable {
            rows: vec![IndexRecord {
                participant: "p01".into(),
                channel: 2,
                rate: 500.0,
                kind: SknaKind::Tvskna,
                task: Task::Tg,
                condition: Condition::CspPlus,
                segment_id: "TG3".into(),
                max: 0.1 + 0.2,
                mean: 1e-7,
                sd: 0.0,
            }],
            ..Default::default()
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let back = IndexTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, table.rows);
    }

    #[test]
    fn duplicate_keys_are_rejected() {
        let text = format!(
            "{TABLE_HEADER}\np,1,500,iskna,VM,Task,VM1,1,1,0\np,1,500,iskna,VM,Task,VM1,2,2,0\n"
        );
        assert!(IndexTable::read_csv(text.as_bytes()).is_err());
    }
}
