//! Agreement of results across sampling rates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use super::grid::{ResultsGrid, TaskColumn};
use crate::error::{Result, SknaError};
use crate::indices::{IndexKind, IndexTable};
use crate::pipeline::SknaKind;

/// Difference of one cell between a lower rate and the reference (highest) rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellDelta {
    pub channel: usize,
    pub kind: SknaKind,
    pub column: TaskColumn,
    pub index: IndexKind,
    pub reference_rate: f64,
    pub rate: f64,
    pub d_delta: Option<f64>,
    pub auc_delta: Option<f64>,
    pub icc_delta: Option<f64>,
    pub stars_reference: String,
    pub stars: String,
}

/// Pearson correlation of per-segment index values between two rates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCorrelation {
    pub channel: usize,
    pub kind: SknaKind,
    pub index: IndexKind,
    pub rate_a: f64,
    pub rate_b: f64,
    pub n_segments: usize,
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateComparison {
    pub rates: Vec<f64>,
    pub deltas: Vec<CellDelta>,
    pub correlations: Vec<RateCorrelation>,
    /// Cells whose star level is identical at every rate.
    pub cells_agreeing: usize,
    pub cells_total: usize,
}

impl RateComparison {
    pub fn star_agreement(&self) -> f64 {
        if self.cells_total == 0 {
            return f64::NAN;
        }
        self.cells_agreeing as f64 / self.cells_total as f64
    }

    pub fn write_deltas_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SknaError::format(e.to_string());
        w.write_record([
            "channel",
            "kind",
            "task",
            "index",
            "reference_rate",
            "rate",
            "d_delta",
            "auc_delta",
            "icc_delta",
            "stars_reference",
            "stars",
        ])
        .map_err(err)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for d in &self.deltas {
            w.write_record([
                d.channel.to_string(),
                d.kind.to_string(),
                d.column.to_string(),
                d.index.to_string(),
                d.reference_rate.to_string(),
                d.rate.to_string(),
                opt(d.d_delta),
                opt(d.auc_delta),
                opt(d.icc_delta),
                d.stars_reference.clone(),
                d.stars.clone(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SknaError::format(e.to_string()))
    }

    pub fn write_correlations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| SknaError::format(e.to_string());
        w.write_record([
            "channel",
            "kind",
            "index",
            "rate_a",
            "rate_b",
            "n_segments",
            "pearson_r",
        ])
        .map_err(err)?;
        for c in &self.correlations {
            w.write_record([
                c.channel.to_string(),
                c.kind.to_string(),
                c.index.to_string(),
                c.rate_a.to_string(),
                c.rate_b.to_string(),
                c.n_segments.to_string(),
                c.pearson_r.map(|x| x.to_string()).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SknaError::format(e.to_string()))
    }

    pub fn summary(&self) -> String {
        let rates: Vec<String> = self.rates.iter().map(|r| format!("{r} Hz")).collect();
        let mut s = format!(
            "rates compared: {}\nstar-level agreement: {}/{} cells ({:.1}%)\n",
            rates.join(", "),
            self.cells_agreeing,
            self.cells_total,
            100.0 * self.star_agreement()
        );
        let max_abs = |f: fn(&CellDelta) -> Option<f64>| {
            self.deltas
                .iter()
                .filter_map(f)
                .map(f64::abs)
                .fold(0.0, f64::max)
        };
        s.push_str(&format!(
            "max |delta d|: {:.3}, max |delta AUC|: {:.3}, max |delta ICC|: {:.3}\n",
            max_abs(|d| d.d_delta),
            max_abs(|d| d.auc_delta),
            max_abs(|d| d.icc_delta)
        ));
        if let Some(min_r) = self
            .correlations
            .iter()
            .filter_map(|c| c.pearson_r)
            .reduce(f64::min)
        {
            s.push_str(&format!(
                "min cross-rate Pearson r of segment indices: {min_r:.3}\n"
            ));
        }
        s
    }
}

/// Pearson correlation; `None` for fewer than 3 pairs or a constant side.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len().min(y.len());
    if n < 3 {
        return None;
    }
    let (mx, my) = (
        x[..n].iter().sum::<f64>() / n as f64,
        y[..n].iter().sum::<f64>() / n as f64,
    );
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mx, y[i] - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Compares a grid spanning several rates. The highest rate is the
/// reference. Every rate must cover the same cells. If the index table is
/// given, per-segment indices are also correlated between each pair of rates.
pub fn compare_rates(grid: &ResultsGrid, table: Option<&IndexTable>) -> Result<RateComparison> {
    let rates = grid.rates();
    if rates.len() < 2 {
        return Err(SknaError::data(
            "rate comparison needs results at two or more rates",
        ));
    }
    let shapes: Vec<BTreeSet<_>> = rates
        .iter()
        .map(|&r| {
            grid.cells
                .iter()
                .filter(|c| c.rate == r)
                .map(|c| c.shape_key())
                .collect()
        })
        .collect();
    for (rate, shape) in rates.iter().zip(&shapes).skip(1) {
        if *shape != shapes[0] {
            let tasks = |s: &BTreeSet<(usize, SknaKind, TaskColumn, IndexKind)>| {
                s.iter()
                    .map(|k| k.2.to_string())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect::<Vec<_>>()
                    .join(",")
            };
            return Err(SknaError::data(format!(
                "grid at {rate} Hz does not match the grid at {} Hz (tasks {} vs {})",
                rates[0],
                tasks(shape),
                tasks(&shapes[0])
            )));
        }
    }

    let reference = rates[0];
    let mut deltas = Vec::new();
    let (mut agreeing, mut total) = (0, 0);
    for key in &shapes[0] {
        let at = |rate: f64| {
            grid.cell(key.0, rate, key.1, key.2, key.3)
                .expect("shape checked")
        };
        let base = at(reference);
        let mut all_same = true;
        for &rate in &rates[1..] {
            let c = at(rate);
            let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
            all_same &= c.stars() == base.stars() && c.is_available() == base.is_available();
            deltas.push(CellDelta {
                channel: key.0,
                kind: key.1,
                column: key.2,
                index: key.3,
                reference_rate: reference,
                rate,
                d_delta: diff(c.cohens_d, base.cohens_d),
                auc_delta: diff(c.auc, base.auc),
                icc_delta: diff(c.icc(), base.icc()),
                stars_reference: base.stars().into(),
                stars: c.stars().into(),
            });
        }
        total += 1;
        agreeing += all_same as usize;
    }

    let correlations = table
        .map(|t| segment_correlations(t, &rates))
        .unwrap_or_default();
    Ok(RateComparison {
        rates,
        deltas,
        correlations,
        cells_agreeing: agreeing,
        cells_total: total,
    })
}

fn segment_correlations(table: &IndexTable, rates: &[f64]) -> Vec<RateCorrelation> {
    // (channel, kind, participant, segment) -> rate bits -> record
    let mut by_segment: BTreeMap<(usize, SknaKind, &str, &str), BTreeMap<u64, usize>> =
        BTreeMap::new();
    for (i, r) in table.rows.iter().enumerate() {
        by_segment
            .entry((
                r.channel,
                r.kind,
                r.participant.as_str(),
                r.segment_id.as_str(),
            ))
            .or_default()
            .insert(r.rate.to_bits(), i);
    }
    let groups: BTreeSet<(usize, SknaKind)> = by_segment.keys().map(|k| (k.0, k.1)).collect();
    let mut out = Vec::new();
    for (channel, kind) in groups {
        for index in IndexKind::ALL {
            for (a, &rate_a) in rates.iter().enumerate() {
                for &rate_b in &rates[a + 1..] {
                    let (mut xs, mut ys) = (Vec::new(), Vec::new());
                    for (k, m) in by_segment.range((channel, kind, "", "")..) {
                        if (k.0, k.1) != (channel, kind) {
                            break;
                        }
                        if let (Some(&i), Some(&j)) =
                            (m.get(&rate_a.to_bits()), m.get(&rate_b.to_bits()))
                        {
                            xs.push(table.rows[i].value(index));
                            ys.push(table.rows[j].value(index));
                        }
                    }
                    out.push(RateCorrelation {
                        channel,
                        kind,
                        index,
                        rate_a,
                        rate_b,
                        n_segments: xs.len(),
                        pearson_r: pearson(&xs, &ys),
                    });
                }
            }
        }
    }
    out
}
