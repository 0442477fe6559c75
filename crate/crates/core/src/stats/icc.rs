use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SknaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IccForm {
    /// ICC(3,1): two-way mixed effects, consistency, single measure.
    #[default]
    TwoWayConsistency,
    /// ICC(1,1): one-way random effects, single measure.
    OneWay,
}

impl fmt::Display for IccForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IccForm::TwoWayConsistency => "ICC(3,1)",
            IccForm::OneWay => "ICC(1,1)",
        })
    }
}

impl FromStr for IccForm {
    type Err = SknaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two-way" | "icc(3,1)" | "3,1" => Ok(IccForm::TwoWayConsistency),
            "one-way" | "icc(1,1)" | "1,1" => Ok(IccForm::OneWay),
            other => Err(SknaError::config(format!(
                "unknown ICC form '{other}' (two-way | one-way)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IccResult {
    pub value: f64,
    pub form: IccForm,
    pub n_subjects: usize,
    pub k_measures: usize,
    /// Some rows had more measures than others and were cut to `k_measures`.
    pub truncated: bool,
}

/// Intraclass correlation of a participants-by-measures matrix. Rows longer
/// than the shortest one are truncated to its length.
pub fn icc(matrix: &[Vec<f64>], form: IccForm) -> Result<IccResult> {
    let n = matrix.len();
    if n < 2 {
        return Err(SknaError::data("ICC needs at least two participants"));
    }
    let k = matrix.iter().map(Vec::len).min().unwrap_or(0);
    if k < 2 {
        return Err(SknaError::data(
            "ICC needs at least two measures per participant",
        ));
    }
    let truncated = matrix.iter().any(|r| r.len() != k);
    let rows: Vec<&[f64]> = matrix.iter().map(|r| &r[..k]).collect();
    if rows.iter().flat_map(|r| r.iter()).any(|v| !v.is_finite()) {
        return Err(SknaError::data("ICC input contains non-finite values"));
    }

    let (nf, kf) = (n as f64, k as f64);
    let grand = rows.iter().flat_map(|r| r.iter()).sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();
    let ss_total: f64 = rows
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| (v - grand).powi(2))
        .sum();
    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();

    let ms_rows = ss_rows / (nf - 1.0);
    let (num, den) = match form {
        IccForm::TwoWayConsistency => {
            let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);
            let ms_err = ss_err / ((nf - 1.0) * (kf - 1.0));
            (ms_rows - ms_err, ms_rows + (kf - 1.0) * ms_err)
        }
        IccForm::OneWay => {
            let ms_within = (ss_total - ss_rows).max(0.0) / (nf * (kf - 1.0));
            (ms_rows - ms_within, ms_rows + (kf - 1.0) * ms_within)
        }
    };
    if !(den > 0.0) {
        return Err(SknaError::data("ICC undefined: the matrix has no variance"));
    }
    Ok(IccResult {
        value: num / den,
        form,
        n_subjects: n,
        k_measures: k,
        truncated,
    })
}
