use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use skna::stats::{
    auc, cohens_d, fit_lmm, fit_lmm_traced, gls_at_lambda, icc, stars, IccForm,
    PairedObservations,
};

/// `n_participants` each with `per_group` baseline and `per_group` task rows.
fn simulate(
    rng: &mut ChaCha8Rng,
    n_participants: usize,
    per_group: usize,
    beta1: f64,
    sigma_u: f64,
    sigma_e: f64,
) -> PairedObservations {
    let u = Normal::new(0.0, sigma_u).unwrap();
    let e = Normal::new(0.0, sigma_e).unwrap();
    let mut obs = PairedObservations::default();
    for p in 0..n_participants {
        let ui = u.sample(rng);
        for g in 0..2u8 {
            for _ in 0..per_group {
                obs.push(format!("p{p}"), g, 2.0 + beta1 * f64::from(g) + ui + e.sample(rng));
            }
        }
    }
    obs
}

/// Dense GLS: X is [1, g], V = I + lambda Z Z'.
struct Dense {
    beta: DVector<f64>,
    q: f64,
    cov_unit: DMatrix<f64>,
    reml: f64,
}

fn dense_gls(obs: &PairedObservations, lambda: f64) -> Dense {
    let n = obs.rows.len();
    let x = DMatrix::from_fn(n, 2, |i, j| {
        if j == 0 {
            1.0
        } else {
            f64::from(obs.rows[i].group)
        }
    });
    let y = DVector::from_iterator(n, obs.rows.iter().map(|r| r.value));
    let v = DMatrix::from_fn(n, n, |i, j| {
        let same = obs.rows[i].participant == obs.rows[j].participant;
        f64::from(i == j) + if same { lambda } else { 0.0 }
    });
    let chol = v.clone().cholesky().unwrap();
    let vinv_x = chol.solve(&x);
    let vinv_y = chol.solve(&y);
    let xtvx = x.transpose() * &vinv_x;
    let cov_unit = xtvx.clone().try_inverse().unwrap();
    let beta = &cov_unit * (x.transpose() * &vinv_y);
    let r = &y - &x * &beta;
    let q = r.dot(&chol.solve(&r));
    let reml = (n - 2) as f64 * q.ln() + v.determinant().ln() + xtvx.determinant().ln();
    Dense {
        beta,
        q,
        cov_unit,
        reml,
    }
}

#[test]
fn gls_matches_dense_linear_algebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let mut obs = simulate(&mut rng, 5 + trial % 4, 3, 0.7, 0.8, 0.5);
        // Unbalance some participants.
        obs.rows.retain(|r| !(r.participant == "p1" && r.group == 1 && r.value > 2.5));
        obs.rows.truncate(obs.rows.len() - trial % 3);
        for lambda in [0.0, 0.01, 0.5, 3.0, 250.0] {
            let fast = gls_at_lambda(&obs, lambda).unwrap();
            let dense = dense_gls(&obs, lambda);
            let tol = 1e-9;
            assert!((fast.beta0 - dense.beta[0]).abs() < tol);
            assert!((fast.beta1 - dense.beta[1]).abs() < tol);
            assert!((fast.q - dense.q).abs() < tol * dense.q.max(1.0));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fast.cov_unit[i][j] - dense.cov_unit[(i, j)]).abs() < tol);
                }
            }
            assert!((fast.reml_criterion - dense.reml).abs() < 1e-7, "{lambda}");
        }
    }
}

#[test]
fn lmm_collapses_to_ols_without_participant_effect() {
    // Participant means are identical, so the REML optimum is lambda = 0.
    let mut obs = PairedObservations::default();
    let base = [1.0, 1.4, 0.7];
    let task = [2.1, 1.6, 2.4];
    for p in 0..6 {
        for k in 0..3 {
            obs.push(format!("p{p}"), 0, base[(k + p) % 3]);
            obs.push(format!("p{p}"), 1, task[(k + 2 * p) % 3]);
        }
    }
    let fit = fit_lmm(&obs).unwrap();
    let mean = |g: u8| {
        let v = obs.values(g);
        v.iter().sum::<f64>() / v.len() as f64
    };
    let ols_b1 = mean(1) - mean(0);
    let resid: f64 = obs
        .rows
        .iter()
        .map(|r| (r.value - mean(r.group)).powi(2))
        .sum();
    let ols_sigma2 = resid / (obs.rows.len() - 2) as f64;
    assert!(fit.lambda < 1e-6, "{}", fit.lambda);
    assert!((fit.beta0 - mean(0)).abs() < 1e-6);
    assert!((fit.beta1 - ols_b1).abs() < 1e-6);
    assert!((fit.sigma_e2 - ols_sigma2).abs() < 1e-6);
    assert!(fit.sigma_u2 < 1e-6);
}

#[test]
fn reml_search_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let obs = simulate(&mut rng, 10, 2, 0.5, 1.0, 0.3);
    let (fit, trace) = fit_lmm_traced(&obs).unwrap();
    assert!(fit.converged);
    assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    // No other lambda does better.
    for l in [0.0, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        assert!(gls_at_lambda(&obs, l).unwrap().reml_criterion >= fit.reml_criterion - 1e-9);
    }
}

#[test]
fn monte_carlo_recovers_fixed_effect_and_variances() {
    let (beta1, sigma_u, sigma_e) = (0.6, 0.5, 0.5);
    let mut b1 = Vec::new();
    let mut su2 = Vec::new();
    let mut se2 = Vec::new();
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let fit = fit_lmm(&simulate(&mut rng, 16, 3, beta1, sigma_u, sigma_e)).unwrap();
        b1.push(fit.beta1);
        su2.push(fit.sigma_u2);
        se2.push(fit.sigma_e2);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    // Per-fit sd of beta1 is about 0.1, so the mean of 100 has sd 0.01.
    assert!((mean(&b1) - beta1).abs() < 0.04, "{}", mean(&b1));
    assert!((mean(&su2) - sigma_u * sigma_u).abs() < 0.05, "{}", mean(&su2));
    assert!((mean(&se2) - sigma_e * sigma_e).abs() < 0.02, "{}", mean(&se2));
}

#[test]
fn wald_test_size_is_near_nominal() {
    let mut rejections = 0;
    let runs = 400;
    for seed in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let fit = fit_lmm(&simulate(&mut rng, 16, 3, 0.0, 0.5, 0.5)).unwrap();
        rejections += (fit.p_value < 0.05) as usize;
    }
    let rate = rejections as f64 / runs as f64;
    assert!((0.02..=0.08).contains(&rate), "{rate}");
}

#[test]
fn cohens_d_of_a_unit_effect() {
    // sigma_u^2 + sigma_e^2 = 1, so d equals beta1.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = 0.5f64.sqrt();
    let fit = fit_lmm(&simulate(&mut rng, 1000, 5, 1.0, s, s)).unwrap();
    let d = cohens_d(&fit).unwrap();
    assert!((d - 1.0).abs() < 0.05, "{d}");
}

fn brute_force_auc(x0: &[f64], x1: &[f64]) -> f64 {
    let mut twice = 0u64;
    for a in x1 {
        for b in x0 {
            twice += if a > b {
                2
            } else if a == b {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * x0.len() * x1.len()) as f64
}

#[test]
fn auc_matches_pairwise_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let n0 = rng.random_range(1..30);
        let n1 = rng.random_range(1..30);
        // Few distinct values, so ties are common.
        let levels = rng.random_range(1..8);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| rng.random_range(0..levels) as f64 * 0.5)
                .collect()
        };
        let (x0, x1) = (draw(n0), draw(n1));
        assert_eq!(auc(&x0, &x1).unwrap(), brute_force_auc(&x0, &x1));
    }
    assert_eq!(auc(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 1.0);
    assert_eq!(auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert_eq!(auc(&[1.0], &[1.0]).unwrap(), 0.5);
    assert!(auc(&[], &[1.0]).is_err());
    assert!(auc(&[f64::NAN], &[1.0]).is_err());
}

fn matrix(rng: &mut ChaCha8Rng, n: usize, k: usize, subject_sd: f64, noise_sd: f64) -> Vec<Vec<f64>> {
    let s = Normal::new(0.0, subject_sd.max(1e-300)).unwrap();
    let e = Normal::new(0.0, noise_sd).unwrap();
    (0..n)
        .map(|_| {
            let si = if subject_sd > 0.0 { s.sample(rng) } else { 0.0 };
            (0..k).map(|j| j as f64 + si + e.sample(rng)).collect()
        })
        .collect()
}

#[test]
fn icc_of_pure_noise_is_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let m = matrix(&mut rng, 1000, 4, 0.0, 1.0);
    let v = icc(&m, IccForm::TwoWayConsistency).unwrap().value;
    assert!(v.abs() < 0.1, "{v}");
}

#[test]
fn icc_recovers_variance_share() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let m = matrix(&mut rng, 1000, 4, 1.0, 1.0);
    let v = icc(&m, IccForm::TwoWayConsistency).unwrap().value;
    assert!((v - 0.5).abs() < 0.05, "{v}");
    // Column offsets (0, 1, 2, 3) count as error in the one-way form.
    let one_way = icc(&m, IccForm::OneWay).unwrap().value;
    assert!(one_way < v);
}

#[test]
fn icc_is_one_without_within_variance() {
    let m: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64; 4]).collect();
    for form in [IccForm::TwoWayConsistency, IccForm::OneWay] {
        assert!((icc(&m, form).unwrap().value - 1.0).abs() < 1e-12);
    }
}

#[test]
fn star_thresholds() {
    assert_eq!(stars(0.0009), "**");
    assert_eq!(stars(0.001), "*");
    assert_eq!(stars(0.049), "*");
    assert_eq!(stars(0.05), "");
    assert_eq!(stars(0.5), "");
}
