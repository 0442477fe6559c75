//! Group statistics on segment indices: random-intercept mixed model,
//! Cohen's d, AUC, ICC, and the evaluation grid built from them.

mod compare;
mod effect;
mod grid;
mod icc;
mod lmm;

pub use compare::{compare_rates, pearson, CellDelta, RateComparison, RateCorrelation};
pub use effect::{auc, cohens_d};
pub use grid::{evaluate_table, stars, Cell, EvaluateOptions, ResultsGrid, TaskColumn};
pub use icc::{icc, IccForm, IccResult};
pub use lmm::{
    fit_lmm, fit_lmm_traced, gls_at_lambda, GlsSolution, LmmFit, Observation, PairedObservations,
    LAMBDA_MAX, LAMBDA_TOL,
};
