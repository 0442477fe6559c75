//! Random-intercept linear mixed model `y_ij = b0 + b1 g_ij + u_i + e_ij`,
//! fitted by restricted maximum likelihood.
//!
//! With `lambda = sigma_u^2 / sigma_e^2` fixed, the covariance of
//! participant `i` is `sigma_e^2 (I + lambda 11')`, whose inverse is
//! `(I - c_i 11') / sigma_e^2` with `c_i = lambda / (1 + lambda n_i)`. The
//! fixed effects then follow from a 2x2 generalized least squares solve, and
//! `sigma_e^2` profiles out, leaving a one-dimensional search over `lambda`.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SknaError};

pub const LAMBDA_MAX: f64 = 1e4;
pub const LAMBDA_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub participant: String,
    /// 0 baseline, 1 task.
    pub group: u8,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedObservations {
    pub rows: Vec<Observation>,
}

impl PairedObservations {
    pub fn push(&mut self, participant: impl Into<String>, group: u8, value: f64) {
        self.rows.push(Observation {
            participant: participant.into(),
            group,
            value,
        });
    }

    pub fn values(&self, group: u8) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.group == group)
            .map(|r| r.value)
            .collect()
    }

    /// Participants lacking a row in either group.
    pub fn unbalanced_participants(&self) -> Vec<String> {
        let mut seen: BTreeMap<&str, [bool; 2]> = BTreeMap::new();
        for r in &self.rows {
            seen.entry(&r.participant).or_default()[usize::from(r.group.min(1))] = true;
        }
        seen.into_iter()
            .filter(|(_, g)| !(g[0] && g[1]))
            .map(|(p, _)| p.to_string())
            .collect()
    }

    pub fn n_participants(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.participant.as_str())
            .collect::<std::collections::BTreeSet<_>>()
            .len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmmFit {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma_u2: f64,
    pub sigma_e2: f64,
    pub se_beta1: f64,
    pub p_value: f64,
    pub converged: bool,
    pub lambda: f64,
    /// Profiled REML criterion (-2 log likelihood up to a constant) at `lambda`.
    pub reml_criterion: f64,
    /// Participants without both a baseline and a task row.
    pub flagged_participants: Vec<String>,
}

/// Generalized least squares at a fixed variance ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct GlsSolution {
    pub beta0: f64,
    pub beta1: f64,
    /// Weighted residual sum of squares `r' (I + lambda Z Z')^-1 r`.
    pub q: f64,
    /// `(X' V^-1 X)^-1` scaled by `sigma_e^2`: multiply by `sigma_e^2` for covariances.
    pub cov_unit: [[f64; 2]; 2],
    pub reml_criterion: f64,
}

/// Per-participant sufficient statistics.
struct Cluster {
    n: f64,
    sg: f64,
    sy: f64,
    sgg: f64,
    sgy: f64,
    syy: f64,
}

struct Design {
    clusters: Vec<Cluster>,
    n_obs: usize,
}

impl Design {
    fn new(obs: &PairedObservations) -> Result<Self> {
        let mut by: BTreeMap<&str, Cluster> = BTreeMap::new();
        let (mut n0, mut n1) = (0usize, 0usize);
        for r in &obs.rows {
            if r.group > 1 {
                return Err(SknaError::Model(format!(
                    "group must be 0 or 1, got {}",
                    r.group
                )));
            }
            if !r.value.is_finite() {
                return Err(SknaError::Model("non-finite observation".into()));
            }
            let g = f64::from(r.group);
            if r.group == 0 {
                n0 += 1
            } else {
                n1 += 1
            }
            let c = by.entry(&r.participant).or_insert(Cluster {
                n: 0.0,
                sg: 0.0,
                sy: 0.0,
                sgg: 0.0,
                sgy: 0.0,
                syy: 0.0,
            });
            c.n += 1.0;
            c.sg += g;
            c.sy += r.value;
            c.sgg += g * g;
            c.sgy += g * r.value;
            c.syy += r.value * r.value;
        }
        if n0 == 0 || n1 == 0 {
            return Err(SknaError::Model(
                "singular design: one group has no observations".into(),
            ));
        }
        if by.len() < 2 {
            return Err(SknaError::Model(
                "at least two participants are required".into(),
            ));
        }
        if n0 + n1 <= 2 {
            return Err(SknaError::Model(
                "not enough observations for two fixed effects".into(),
            ));
        }
        Ok(Self {
            clusters: by.into_values().collect(),
            n_obs: n0 + n1,
        })
    }

    fn gls(&self, lambda: f64) -> Result<GlsSolution> {
        // A = sum X' W X, b = sum X' W y, with W = I - c 11'.
        let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut log_det_v = 0.0;
        for c in &self.clusters {
            let w = lambda / (1.0 + lambda * c.n);
            a00 += c.n - w * c.n * c.n;
            a01 += c.sg - w * c.n * c.sg;
            a11 += c.sgg - w * c.sg * c.sg;
            b0 += c.sy - w * c.n * c.sy;
            b1 += c.sgy - w * c.sg * c.sy;
            log_det_v += (1.0 + lambda * c.n).ln();
        }
        let det = a00 * a11 - a01 * a01;
        if !(det > 1e-12 * (a00 * a11).abs()) {
            return Err(SknaError::Model("singular fixed-effects design".into()));
        }
        let inv = [[a11 / det, -a01 / det], [-a01 / det, a00 / det]];
        let beta0 = inv[0][0] * b0 + inv[0][1] * b1;
        let beta1 = inv[1][0] * b0 + inv[1][1] * b1;

        // r' W r accumulated from the sufficient statistics.
        let mut q = 0.0;
        for c in &self.clusters {
            let w = lambda / (1.0 + lambda * c.n);
            let rr = c.syy - 2.0 * beta0 * c.sy - 2.0 * beta1 * c.sgy
                + beta0 * beta0 * c.n
                + 2.0 * beta0 * beta1 * c.sg
                + beta1 * beta1 * c.sgg;
            let rsum = c.sy - beta0 * c.n - beta1 * c.sg;
            q += rr - w * rsum * rsum;
        }
        let q = q.max(0.0);
        let dof = (self.n_obs - 2) as f64;
        let reml_criterion = dof * q.ln() + log_det_v + det.ln();
        Ok(GlsSolution {
            beta0,
            beta1,
            q,
            cov_unit: inv,
            reml_criterion,
        })
    }
}

/// GLS fixed effects at a given `lambda = sigma_u^2 / sigma_e^2`.
pub fn gls_at_lambda(obs: &PairedObservations, lambda: f64) -> Result<GlsSolution> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(SknaError::Model(format!(
            "variance ratio {lambda} must be >= 0"
        )));
    }
    Design::new(obs)?.gls(lambda)
}

fn search_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut e = -6.0;
    while e <= 4.0 + 1e-12 {
        grid.push(10f64.powf(e));
        e += 0.25;
    }
    grid
}

/// Fit plus the best REML criterion after each search step (non-increasing).
pub fn fit_lmm_traced(obs: &PairedObservations) -> Result<(LmmFit, Vec<f64>)> {
    let design = Design::new(obs)?;
    let crit = |l: f64| design.gls(l).map(|s| s.reml_criterion);

    let grid = search_grid();
    let mut values = Vec::with_capacity(grid.len());
    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    for &l in &grid {
        let v = crit(l)?;
        values.push(v);
        best = best.min(v);
        trace.push(best);
    }
    if !best.is_finite() {
        return Err(SknaError::Model("zero residual variance".into()));
    }
    let k = (0..grid.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty grid");

    // Golden-section refinement inside the neighbouring grid points.
    let (mut lo, mut hi) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
    let (mut best_l, mut best_v) = (grid[k], values[k]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (crit(x1)?, crit(x2)?);
    let mut iterations = 0;
    while hi - lo > LAMBDA_TOL && iterations < 500 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = crit(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = crit(x2)?;
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best_v {
                best_v = f;
                best_l = x;
            }
        }
        trace.push(best_v);
        iterations += 1;
    }
    let converged = hi - lo <= LAMBDA_TOL && best_l < LAMBDA_MAX * (1.0 - 1e-9);

    let sol = design.gls(best_l)?;
    let dof = (design.n_obs - 2) as f64;
    let sigma_e2 = sol.q / dof;
    if !(sigma_e2 > 0.0) {
        return Err(SknaError::Model("zero residual variance".into()));
    }
    let se_beta1 = (sigma_e2 * sol.cov_unit[1][1]).sqrt();
    let z = sol.beta1 / se_beta1;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value = (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    let fit = LmmFit {
        beta0: sol.beta0,
        beta1: sol.beta1,
        sigma_u2: best_l * sigma_e2,
        sigma_e2,
        se_beta1,
        p_value,
        converged,
        lambda: best_l,
        reml_criterion: sol.reml_criterion,
        flagged_participants: obs.unbalanced_participants(),
    };
    Ok((fit, trace))
}

pub fn fit_lmm(obs: &PairedObservations) -> Result<LmmFit> {
    fit_lmm_traced(obs).map(|(f, _)| f)
}
