use super::lmm::LmmFit;
use crate::error::{Result, SknaError};

/// Fixed group effect over the total standard deviation `sqrt(sigma_u^2 + sigma_e^2)`.
pub fn cohens_d(fit: &LmmFit) -> Result<f64> {
    if !fit.converged {
        return Err(SknaError::Model("mixed model did not converge".into()));
    }
    let total = fit.sigma_u2 + fit.sigma_e2;
    if !(total > 0.0) {
        return Err(SknaError::Model("zero total variance".into()));
    }
    Ok(fit.beta1 / total.sqrt())
}

/// Area under the ROC curve for `values_1` (positives) against `values_0`:
/// `P(X1 > X0) + P(X1 = X0) / 2`, from midranks (Mann-Whitney U).
pub fn auc(values_0: &[f64], values_1: &[f64]) -> Result<f64> {
    if values_0.is_empty() || values_1.is_empty() {
        return Err(SknaError::data("AUC needs at least one value on each side"));
    }
    if values_0.iter().chain(values_1).any(|v| v.is_nan()) {
        return Err(SknaError::data("AUC input contains NaN"));
    }
    let mut pooled: Vec<(f64, bool)> = values_0
        .iter()
        .map(|&v| (v, false))
        .chain(values_1.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Sum of the positives' midranks (1-based), kept in half units so it stays exact.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        let positives = pooled[i..=j].iter().filter(|p| p.1).count() as u64;
        twice_rank_sum += twice_mid * positives;
        i = j + 1;
    }
    let (n0, n1) = (values_0.len() as u64, values_1.len() as u64);
    let twice_u = twice_rank_sum - n1 * (n1 + 1);
    Ok(twice_u as f64 / (2 * n0 * n1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(beta1: f64, su2: f64, se2: f64) -> LmmFit {
        LmmFit {
            beta0: 0.0,
            beta1,
            sigma_u2: su2,
            sigma_e2: se2,
            se_beta1: 1.0,
            p_value: 0.5,
            converged: true,
            lambda: su2 / se2,
            reml_criterion: 0.0,
            flagged_participants: Vec::new(),
        }
    }

    #[test]
    fn d_examples() {
        assert_eq!(cohens_d(&fit(0.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_eq!(cohens_d(&fit(1.0, 0.0, 1.0)).unwrap(), 1.0);
        assert_eq!(cohens_d(&fit(-2.0, 3.0, 1.0)).unwrap(), -1.0);
        assert!(cohens_d(&fit(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(auc(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(auc(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).unwrap(), 7.0 / 9.0);
        assert!(auc(&[], &[1.0]).is_err());
    }
}
