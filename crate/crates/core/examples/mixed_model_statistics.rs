//! Random-intercept model, Cohen's d, AUC and ICC on simulated repeated
//! measures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skna::stats::{auc, cohens_d, fit_lmm, icc, stars, IccForm, PairedObservations};

fn main() -> skna::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let subject = Normal::new(0.0, 0.5).unwrap();
    let noise = Normal::new(0.0, 0.5).unwrap();

    let mut obs = PairedObservations::default();
    let mut task_means = Vec::new();
    for p in 0..16 {
        let u = subject.sample(&mut rng);
        let mut row = Vec::new();
        for group in 0..2u8 {
            for _ in 0..3 {
                let v = 1.0 + 0.6 * f64::from(group) + u + noise.sample(&mut rng);
                obs.push(format!("P{:02}", p + 1), group, v);
                if group == 1 {
                    row.push(v);
                }
            }
        }
        task_means.push(row);
    }

    let fit = fit_lmm(&obs)?;
    println!(
        "beta1 {:.3} (se {:.3}), p = {:.4}{}",
        fit.beta1,
        fit.se_beta1,
        fit.p_value,
        stars(fit.p_value)
    );
    println!("sigma_u^2 {:.3}, sigma_e^2 {:.3}", fit.sigma_u2, fit.sigma_e2);
    println!("Cohen's d {:.3}", cohens_d(&fit)?);
    println!("AUC {:.3}", auc(&obs.values(0), &obs.values(1))?);
    for form in [IccForm::TwoWayConsistency, IccForm::OneWay] {
        let r = icc(&task_means, form)?;
        println!("{form}: {:.3} over {}x{}", r.value, r.n_subjects, r.k_measures);
    }
    Ok(())
}
