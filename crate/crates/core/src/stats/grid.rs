//! The evaluation grid: one cell per channel, rate, SKNA kind, task column
//! and index, holding Cohen's d with significance stars, AUC and ICC.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::effect::{auc, cohens_d};
use super::icc::{icc, IccForm};
use super::lmm::{fit_lmm, PairedObservations};
use crate::error::{Result, SknaError};
use crate::indices::{stimulus_of, Condition, IndexKind, IndexRecord, IndexTable};
use crate::pipeline::SknaKind;
use crate::recording::Task;

/// A task column of the grid. Thermal-grill segments split by pain category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskColumn {
    #[serde(rename = "VM")]
    Vm,
    #[serde(rename = "ST")]
    St,
    #[serde(rename = "CSP-")]
    CspMinus,
    #[serde(rename = "CSP+")]
    CspPlus,
}

impl TaskColumn {
    pub const ALL: [TaskColumn; 4] = [
        TaskColumn::Vm,
        TaskColumn::St,
        TaskColumn::CspMinus,
        TaskColumn::CspPlus,
    ];

    pub fn task(self) -> Task {
        match self {
            TaskColumn::Vm => Task::Vm,
            TaskColumn::St => Task::St,
            TaskColumn::CspMinus | TaskColumn::CspPlus => Task::Tg,
        }
    }

    pub fn condition(self) -> Condition {
        match self {
            TaskColumn::Vm | TaskColumn::St => Condition::Task,
            TaskColumn::CspMinus => Condition::CspMinus,
            TaskColumn::CspPlus => Condition::CspPlus,
        }
    }
}

impl fmt::Display for TaskColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskColumn::Vm => "VM",
            TaskColumn::St => "ST",
            TaskColumn::CspMinus => "CSP-",
            TaskColumn::CspPlus => "CSP+",
        })
    }
}

impl FromStr for TaskColumn {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "VM" => Ok(TaskColumn::Vm),
            "ST" => Ok(TaskColumn::St),
            "CSP-" => Ok(TaskColumn::CspMinus),
            "CSP+" => Ok(TaskColumn::CspPlus),
            other => Err(SknaError::format(format!("unknown task column '{other}'"))),
        }
    }
}

/// `**` for p < .001, `*` for p < .05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub channel: usize,
    pub rate: f64,
    pub kind: SknaKind,
    pub column: TaskColumn,
    pub index: IndexKind,
    pub cohens_d: Option<f64>,
    pub p_value: Option<f64>,
    pub auc: Option<f64>,
    /// ICC as computed; may be negative.
    pub icc_raw: Option<f64>,
    pub icc_form: IccForm,
    pub n_participants: usize,
    pub n_baseline: usize,
    pub n_task: usize,
    /// Why the cell could not be fully evaluated.
    pub unavailable: Option<String>,
}

impl Cell {
    pub fn is_available(&self) -> bool {
        self.unavailable.is_none()
    }

    pub fn stars(&self) -> &'static str {
        self.p_value.map(stars).unwrap_or("")
    }

    /// ICC floored at zero for display.
    pub fn icc(&self) -> Option<f64> {
        self.icc_raw.map(|v| v.max(0.0))
    }

    /// The (channel, kind, column, index) coordinates shared across rates.
    pub fn shape_key(&self) -> (usize, SknaKind, TaskColumn, IndexKind) {
        (self.channel, self.kind, self.column, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsGrid {
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub icc_form: IccForm,
}

fn stimulus_number(id: &str) -> (u64, &str) {
    let digits = id.trim_start_matches(|c: char| !c.is_ascii_digit());
    (digits.parse().unwrap_or(u64::MAX), id)
}

/// Observations for one cell: (participant, stimulus id) -> (baseline, task).
fn cell_pairs<'a>(
    rows: &[&'a IndexRecord],
    column: TaskColumn,
) -> (Vec<&'a IndexRecord>, Vec<&'a IndexRecord>) {
    let task = column.task();
    let stimuli: Vec<&IndexRecord> = rows
        .iter()
        .copied()
        .filter(|r| r.task == task && r.condition == column.condition())
        .collect();
    let stim_ids: BTreeSet<(&str, &str)> = stimuli
        .iter()
        .map(|r| (r.participant.as_str(), r.segment_id.as_str()))
        .collect();
    let baselines: Vec<&IndexRecord> = rows
        .iter()
        .copied()
        .filter(|r| r.task == task && r.condition == Condition::Baseline)
        .filter(|r| {
            // Thermal-grill baselines belong to the pain category of their stimulus.
            task != Task::Tg
                || stimulus_of(&r.segment_id)
                    .map(|s| stim_ids.contains(&(r.participant.as_str(), s)))
                    .unwrap_or(false)
        })
        .collect();
    (baselines, stimuli)
}

fn evaluate_cell(
    rows: &[&IndexRecord],
    (channel, rate, kind): (usize, f64, SknaKind),
    column: TaskColumn,
    index: IndexKind,
    opts: &EvaluateOptions,
) -> Cell {
    let (baselines, stimuli) = cell_pairs(rows, column);
    let mut obs = PairedObservations::default();
    for r in &baselines {
        obs.push(r.participant.clone(), 0, r.value(index));
    }
    for r in &stimuli {
        obs.push(r.participant.clone(), 1, r.value(index));
    }
    let complete: BTreeSet<&str> = {
        let b: BTreeSet<&str> = baselines.iter().map(|r| r.participant.as_str()).collect();
        stimuli
            .iter()
            .map(|r| r.participant.as_str())
            .filter(|p| b.contains(p))
            .collect()
    };
    let mut cell = Cell {
        channel,
        rate,
        kind,
        column,
        index,
        cohens_d: None,
        p_value: None,
        auc: None,
        icc_raw: None,
        icc_form: opts.icc_form,
        n_participants: complete.len(),
        n_baseline: baselines.len(),
        n_task: stimuli.len(),
        unavailable: None,
    };
    if complete.len() < 2 {
        cell.unavailable =
            Some("fewer than two participants with baseline and task segments".into());
        return cell;
    }
    let mut problems = Vec::new();
    match fit_lmm(&obs).and_then(|f| Ok((cohens_d(&f)?, f.p_value))) {
        Ok((d, p)) => {
            cell.cohens_d = Some(d);
            cell.p_value = Some(p);
        }
        Err(e) => problems.push(e.to_string()),
    }
    match auc(&obs.values(0), &obs.values(1)) {
        Ok(a) => cell.auc = Some(a),
        Err(e) => problems.push(e.to_string()),
    }

    // ICC matrix: per participant [baseline_1, task_1, baseline_2, task_2, ...].
    let base_by: BTreeMap<(&str, &str), f64> = baselines
        .iter()
        .filter_map(|r| {
            stimulus_of(&r.segment_id).map(|s| ((r.participant.as_str(), s), r.value(index)))
        })
        .collect();
    let mut per_participant: BTreeMap<&str, Vec<(&IndexRecord, f64)>> = BTreeMap::new();
    for r in &stimuli {
        if let Some(&b) = base_by.get(&(r.participant.as_str(), r.segment_id.as_str())) {
            per_participant
                .entry(&r.participant)
                .or_default()
                .push((r, b));
        }
    }
    let matrix: Vec<Vec<f64>> = per_participant
        .into_values()
        .map(|mut pairs| {
            pairs.sort_by(|a, b| {
                stimulus_number(&a.0.segment_id).cmp(&stimulus_number(&b.0.segment_id))
            });
            pairs
                .iter()
                .flat_map(|(r, b)| [*b, r.value(index)])
                .collect()
        })
        .collect();
    match icc(&matrix, opts.icc_form) {
        Ok(r) => cell.icc_raw = Some(r.value),
        Err(e) => problems.push(e.to_string()),
    }
    if !problems.is_empty() {
        cell.unavailable = Some(problems.join("; "));
    }
    cell
}

/// Evaluates every channel x rate x kind x task column x index present in
/// the table. Cells without enough data are kept and marked unavailable.
pub fn evaluate_table(table: &IndexTable, opts: &EvaluateOptions) -> Result<ResultsGrid> {
    if table.rows.is_empty() {
        return Err(SknaError::data("index table is empty"));
    }
    let mut slices: BTreeMap<(SknaKind, usize, u64), Vec<&IndexRecord>> = BTreeMap::new();
    for r in &table.rows {
        // Negated bits order positive rates descending.
        slices
            .entry((r.kind, r.channel, (-r.rate).to_bits()))
            .or_default()
            .push(r);
    }
    let columns: Vec<TaskColumn> = TaskColumn::ALL
        .into_iter()
        .filter(|c| {
            table
                .rows
                .iter()
                .any(|r| r.task == c.task() && r.condition == c.condition())
        })
        .collect();
    let mut keys: Vec<_> = slices.keys().copied().collect();
    keys.sort_by(|a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then(f64::from_bits(a.2).total_cmp(&f64::from_bits(b.2)))
    });
    let mut units = Vec::new();
    for &key in &keys {
        for index in IndexKind::ALL {
            units.extend(columns.iter().map(|&c| (key, index, c)));
        }
    }
    // Cells are independent; collect keeps the enumeration order.
    let cells: Vec<Cell> = units
        .into_par_iter()
        .map(|(key, index, column)| {
            let (kind, channel, rate) = (key.0, key.1, -f64::from_bits(key.2));
            evaluate_cell(&slices[&key], (channel, rate, kind), column, index, opts)
        })
        .collect();
    Ok(ResultsGrid { cells })
}

const GRID_HEADER: [&str; 16] = [
    "channel",
    "rate",
    "kind",
    "task",
    "index",
    "cohens_d",
    "p_value",
    "stars",
    "auc",
    "icc",
    "icc_raw",
    "icc_form",
    "n_participants",
    "n_baseline",
    "n_task",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultsGrid {
    pub fn rates(&self) -> Vec<f64> {
        let mut r: Vec<f64> = Vec::new();
        for c in &self.cells {
            if !r.contains(&c.rate) {
                r.push(c.rate);
            }
        }
        r.sort_by(|a, b| b.total_cmp(a));
        r
    }

    pub fn cell(
        &self,
        channel: usize,
        rate: f64,
        kind: SknaKind,
        column: TaskColumn,
        index: IndexKind,
    ) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.channel == channel
                && c.rate == rate
                && c.kind == kind
                && c.column == column
                && c.index == index
        })
    }

    pub fn merge(grids: Vec<ResultsGrid>) -> ResultsGrid {
        ResultsGrid {
            cells: grids.into_iter().flat_map(|g| g.cells).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SknaError::format(e.to_string());
        w.write_record(GRID_HEADER).map_err(err)?;
        for c in &self.cells {
            w.write_record([
                c.channel.to_string(),
                c.rate.to_string(),
                c.kind.to_string(),
                c.column.to_string(),
                c.index.to_string(),
                opt(c.cohens_d),
                opt(c.p_value),
                c.stars().to_string(),
                opt(c.auc),
                opt(c.icc()),
                opt(c.icc_raw),
                c.icc_form.to_string(),
                c.n_participants.to_string(),
                c.n_baseline.to_string(),
                c.n_task.to_string(),
                c.unavailable
                    .clone()
                    .map(|r| format!("unavailable: {r}"))
                    .unwrap_or_else(|| "ok".into()),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SknaError::format(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<ResultsGrid> {
        let mut reader = csv::Reader::from_reader(input);
        let headers = reader
            .headers()
            .map_err(|e| SknaError::format(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != GRID_HEADER {
            return Err(SknaError::format(format!(
                "results grid header must be '{}'",
                GRID_HEADER.join(",")
            )));
        }
        let mut cells = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| SknaError::format(format!("grid row {}: {e}", i + 1)))?;
            let f = |k: usize| rec.get(k).unwrap_or("");
            let bad = |k: usize| {
                SknaError::format(format!(
                    "grid row {}: bad {} '{}'",
                    i + 1,
                    GRID_HEADER[k],
                    f(k)
                ))
            };
            let num = |k: usize| -> Result<Option<f64>> {
                if f(k).is_empty() {
                    Ok(None)
                } else {
                    f(k).parse().map(Some).map_err(|_| bad(k))
                }
            };
            let count = |k: usize| -> Result<usize> { f(k).parse().map_err(|_| bad(k)) };
            let status = f(15);
            cells.push(Cell {
                channel: count(0)?,
                rate: f(1).parse().map_err(|_| bad(1))?,
                kind: f(2).parse().map_err(|_| bad(2))?,
                column: f(3).parse()?,
                index: f(4).parse().map_err(|_| bad(4))?,
                cohens_d: num(5)?,
                p_value: num(6)?,
                auc: num(8)?,
                icc_raw: num(10)?,
                icc_form: match f(11) {
                    "ICC(3,1)" => IccForm::TwoWayConsistency,
                    "ICC(1,1)" => IccForm::OneWay,
                    _ => return Err(bad(11)),
                },
                n_participants: count(12)?,
                n_baseline: count(13)?,
                n_task: count(14)?,
                unavailable: if status == "ok" {
                    None
                } else {
                    Some(status.trim_start_matches("unavailable: ").to_string())
                },
            });
        }
        Ok(ResultsGrid { cells })
    }

    /// Aligned text table: one block per SKNA kind, rows channel x rate x
    /// index, and Cohen's d / AUC / ICC under each task column.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let kinds: BTreeSet<SknaKind> = self.cells.iter().map(|c| c.kind).collect();
        let columns: BTreeSet<TaskColumn> = self.cells.iter().map(|c| c.column).collect();
        let channels: BTreeSet<usize> = self.cells.iter().map(|c| c.channel).collect();
        let rates = self.rates();
        let num = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into());
        for kind in kinds {
            let _ = writeln!(
                out,
                "{}",
                match kind {
                    SknaKind::Iskna => "iSKNA indices",
                    SknaKind::Tvskna => "TVSKNA indices",
                }
            );
            let mut header = format!("{:<9} {:<9} {:<6}", "Channel", "Rate", "Index");
            for c in &columns {
                header.push_str(&format!(" | {:<24}", format!("{c}: d / AUC / ICC")));
            }
            let _ = writeln!(out, "{header}");
            let _ = writeln!(out, "{}", "-".repeat(header.len()));
            for &ch in &channels {
                for &rate in &rates {
                    for index in IndexKind::ALL {
                        let mut line = format!(
                            "{:<9} {:<9} {:<6}",
                            format!("Ch. {ch}"),
                            format!("{} kHz", rate / 1000.0),
                            index.label()
                        );
                        for &col in &columns {
                            let text = match self.cell(ch, rate, kind, col, index) {
                                Some(c) => format!(
                                    "{:>8} {:>6} {:>6}",
                                    format!("{}{}", num(c.cohens_d), c.stars()),
                                    num(c.auc),
                                    num(c.icc())
                                ),
                                None => format!("{:>8} {:>6} {:>6}", "-", "-", "-"),
                            };
                            line.push_str(&format!(" | {text:<24}"));
                        }
                        let _ = writeln!(out, "{}", line.trim_end());
                    }
                }
            }
            let _ = writeln!(out);
        }
        out.push_str(
            "* p < .05, ** p < .001. ICC floored at 0 for display; raw values are in the CSV.\n",
        );
        out
    }
}
