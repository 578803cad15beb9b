mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use sface_core::glm::{
    fit_exposure_model, fit_logistic, fit_multinomial, fit_outcome_model, logistic_score, multinomial_score, Design,
    FitOptions, GlmError,
};

/// Textbook IRLS written against nalgebra, independent of the library's
/// Newton driver.
fn irls(design: &Design, y: &[bool], w: &[f64]) -> Vec<f64> {
    let (n, p) = (design.rows(), design.cols());
    let x = DMatrix::from_fn(n, p, |i, j| design.row(i)[j]);
    let mut beta = DVector::zeros(p);
    for _ in 0..100 {
        let eta = &x * &beta;
        let mu = eta.map(sigmoid);
        let v = mu.map(|m| m * (1.0 - m));
        let z = DVector::from_fn(n, |i, _| eta[i] + (f64::from(u8::from(y[i])) - mu[i]) / v[i]);
        let xtw = DMatrix::from_fn(p, n, |j, i| x[(i, j)] * w[i] * v[i]);
        let next = (&xtw * &x).cholesky().unwrap().solve(&(&xtw * z));
        let delta = (&next - &beta).amax();
        beta = next;
        if delta < 1e-13 {
            break;
        }
    }
    beta.iter().copied().collect()
}

#[test]
fn logistic_matches_independent_irls() {
    let mut r = rng(1);
    for _ in 0..10 {
        let d = random_design(&mut r, 400, 2);
        let y = draw_binary(&mut r, &d, &[-0.5, 0.8, -0.4, 0.7]);
        let w: Vec<f64> = (0..400).map(|i| 0.5 + (i % 3) as f64).collect();
        let fit = fit_logistic(&d, &y, &w, &FitOptions::default(), None).unwrap();
        let oracle = irls(&d, &y, &w);
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}

#[test]
fn multinomial_saturated_closed_form() {
    // One binary covariate: the fit reproduces the per-stratum log odds.
    let mut values = Vec::new();
    let mut y = Vec::new();
    let counts = [[50, 12, 7], [30, 15, 9]];
    for (x, c) in counts.iter().enumerate() {
        for (k, &m) in c.iter().enumerate() {
            for _ in 0..m {
                values.extend([1.0, x as f64]);
                y.push(k as u8);
            }
        }
    }
    let n = y.len();
    let d = Design::new(vec!["(intercept)".into(), "x".into()], n, values);
    let fit = fit_multinomial(&d, &y, &vec![1.0; n], &FitOptions::default(), None).unwrap();
    for k in 1..3 {
        let b0 = (counts[0][k] as f64 / counts[0][0] as f64).ln();
        let b1 = (counts[1][k] as f64 / counts[1][0] as f64).ln() - b0;
        assert!((fit.coefficients[k - 1][0] - b0).abs() < 1e-10);
        assert!((fit.coefficients[k - 1][1] - b1).abs() < 1e-10);
    }
}

#[test]
fn intercept_only_exact() {
    let n = 1000;
    let d = Design::new(vec!["(intercept)".into()], n, vec![1.0; n]);
    let y: Vec<bool> = (0..n).map(|i| i < 137).collect();
    let fit = fit_logistic(&d, &y, &vec![1.0; n], &FitOptions::default(), None).unwrap();
    assert!((fit.coefficients[0] - (137.0_f64 / 863.0).ln()).abs() < 1e-12);
    let y: Vec<u8> = (0..n)
        .map(|i| {
            if i < 61 {
                1
            } else if i < 80 {
                2
            } else {
                0
            }
        })
        .collect();
    let fit = fit_multinomial(&d, &y, &vec![1.0; n], &FitOptions::default(), None).unwrap();
    assert!((fit.coefficients[0][0] - (61.0_f64 / 920.0).ln()).abs() < 1e-12);
    assert!((fit.coefficients[1][0] - (19.0_f64 / 920.0).ln()).abs() < 1e-12);
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn score_equations_hold_at_convergence() {
    let mut r = rng(2);
    for rep in 0..50 {
        let n = 300 + 10 * rep;
        let d = random_design(&mut r, n, 2);
        let w = vec![1.0; n];
        let y = draw_binary(&mut r, &d, &[-0.3, 0.5, 0.2, -0.6]);
        let fit = fit_logistic(&d, &y, &w, &FitOptions::default(), None).unwrap();
        let (_, s) = logistic_score(&d, &y, &w, &fit.coefficients);
        assert!(l2(&s) < 1e-8, "logistic rep {rep}: {}", l2(&s));
        let y = draw_categorical(&mut r, &d, &[-1.0, 0.4, 0.1, 0.3], &[-1.5, -0.2, 0.5, 0.6]);
        let fit = fit_multinomial(&d, &y, &w, &FitOptions::default(), None).unwrap();
        let (_, s) = multinomial_score(&d, &y, &w, &fit.stacked());
        assert!(l2(&s) < 1e-8, "multinomial rep {rep}: {}", l2(&s));
    }
}

/// Central differences of the log-likelihood against the analytic score.
fn fd_check(f: impl Fn(&[f64]) -> (f64, Vec<f64>), at: &[f64]) {
    let (_, g) = f(at);
    for j in 0..at.len() {
        let h = 1e-5 * at[j].abs().max(1.0);
        let mut up = at.to_vec();
        let mut dn = at.to_vec();
        up[j] += h;
        dn[j] -= h;
        let fd = (f(&up).0 - f(&dn).0) / (2.0 * h);
        let rel = (fd - g[j]).abs() / g[j].abs().max(1.0);
        assert!(rel < 1e-5, "coordinate {j}: analytic {} vs fd {fd}", g[j]);
    }
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let mut r = rng(3);
    for _ in 0..10 {
        let d = random_design(&mut r, 200, 2);
        let w: Vec<f64> = (0..200).map(|i| 1.0 + (i % 4) as f64 * 0.25).collect();
        let y = draw_binary(&mut r, &d, &[0.2, 0.5, -0.5, 0.3]);
        fd_check(|b| logistic_score(&d, &y, &w, b), &[0.1, -0.3, 0.4, 0.2]);
        let y = draw_categorical(&mut r, &d, &[-1.0, 0.4, 0.1, 0.3], &[-1.5, -0.2, 0.5, 0.6]);
        fd_check(|t| multinomial_score(&d, &y, &w, t), &[-0.7, 0.2, 0.0, 0.1, -1.1, 0.3, 0.3, -0.4]);
    }
}

#[test]
fn affine_reparametrisation_leaves_predictions() {
    let mut r = rng(4);
    let d = random_design(&mut r, 800, 1);
    let y = draw_categorical(&mut r, &d, &[-1.0, 0.5, 0.3], &[-1.4, -0.4, 0.6]);
    let w = vec![1.0; 800];
    let fit = fit_multinomial(&d, &y, &w, &FitOptions::default(), None).unwrap();
    // z' = 3 z + 2: the slope scales by 1/3 and the intercept absorbs the shift.
    let values: Vec<f64> = (0..800)
        .flat_map(|i| {
            let x = d.row(i);
            [x[0], 3.0 * x[1] + 2.0, x[2]]
        })
        .collect();
    let d2 = Design::new(d.names().to_vec(), 800, values);
    let fit2 = fit_multinomial(&d2, &y, &w, &FitOptions::default(), None).unwrap();
    for k in 0..2 {
        assert!((fit2.coefficients[k][1] - fit.coefficients[k][1] / 3.0).abs() < 1e-8);
    }
    for i in 0..800 {
        let (p, q) = (fit.predict_row(d.row(i)), fit2.predict_row(d2.row(i)));
        for c in 0..3 {
            assert!((p[c] - q[c]).abs() < 1e-10);
        }
    }
    assert!((fit.log_likelihood - fit2.log_likelihood).abs() < 1e-8);
}

#[test]
fn loglik_trace_is_nondecreasing() {
    let mut r = rng(5);
    for _ in 0..20 {
        let d = random_design(&mut r, 300, 2);
        let w = vec![1.0; 300];
        let y = draw_categorical(&mut r, &d, &[-1.0, 1.2, 0.1, 0.8], &[-1.5, -0.9, 1.1, 0.6]);
        // A poor start forces several iterations.
        let fit =
            fit_multinomial(&d, &y, &w, &FitOptions::default(), Some(&[3.0, -3.0, 2.0, 0.0, -4.0, 2.0, 0.0, 1.0]))
                .unwrap();
        assert!(fit.trace.len() > 2);
        for pair in fit.trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-9 * pair[0].abs(), "{pair:?}");
        }
    }
}

#[test]
fn large_sample_recovers_parameters() {
    let mut r = rng(6);
    let n = 50_000;
    let d = random_design(&mut r, n, 1);
    let (t1, t2) = ([-2.0, 0.5, 0.7], [-2.5, -0.3, 0.4]);
    let y = draw_categorical(&mut r, &d, &t1, &t2);
    let fit = fit_multinomial(&d, &y, &vec![1.0; n], &FitOptions::default(), None).unwrap();
    for j in 0..3 {
        assert!((fit.coefficients[0][j] - t1[j]).abs() < 0.08, "{:?}", fit.coefficients);
        assert!((fit.coefficients[1][j] - t2[j]).abs() < 0.12, "{:?}", fit.coefficients);
    }
    let beta = [0.3, -0.8, 0.5];
    let yb = draw_binary(&mut r, &d, &beta);
    let fit = fit_logistic(&d, &yb, &vec![1.0; n], &FitOptions::default(), None).unwrap();
    for (got, want) in fit.coefficients.iter().zip(beta) {
        assert!((got - want).abs() < 0.06);
    }
}

#[test]
fn model_wrappers_use_the_documented_designs() {
    let data = observational(3000, 7);
    let fit_y = fit_outcome_model(&data, &FitOptions::default(), None).unwrap();
    let fit_a = fit_exposure_model(&data, &FitOptions::default(), None).unwrap();
    let n = data.len();
    let mut vy = Vec::new();
    let mut va = Vec::new();
    for i in 0..n {
        let x = data.covariates(i);
        vy.extend([1.0, f64::from(data.exposure()[i]), x[0], x[1]]);
        va.extend([1.0, x[0], x[1]]);
    }
    let dy = Design::new(vec!["(intercept)".into(), "A".into(), "x1".into(), "x2".into()], n, vy);
    let da = Design::new(vec!["(intercept)".into(), "x1".into(), "x2".into()], n, va);
    let y: Vec<u8> = data.outcomes().iter().map(|o| o.category().unwrap() as u8).collect();
    let a: Vec<bool> = data.exposure().iter().map(|&a| a == 1).collect();
    let m = fit_multinomial(&dy, &y, data.weights(), &FitOptions::default(), None).unwrap();
    let l = fit_logistic(&da, &a, data.weights(), &FitOptions::default(), None).unwrap();
    for k in 0..2 {
        assert!((fit_y.alpha[k] - m.coefficients[k][0]).abs() < 1e-9);
        assert!((fit_y.beta[k] - m.coefficients[k][1]).abs() < 1e-9);
        assert!((fit_y.gamma[k][0] - m.coefficients[k][2]).abs() < 1e-9);
        assert!((fit_y.gamma[k][1] - m.coefficients[k][3]).abs() < 1e-9);
    }
    assert!((fit_a.intercept - l.coefficients[0]).abs() < 1e-9);
    assert!((fit_a.coefficients[1] - l.coefficients[2]).abs() < 1e-9);
}

#[test]
fn collinear_design_is_rejected() {
    let mut r = rng(8);
    let d = random_design(&mut r, 100, 1);
    let values: Vec<f64> = (0..100)
        .flat_map(|i| {
            let x = d.row(i);
            [x[0], x[1], 2.0 * x[1]]
        })
        .collect();
    let d2 = Design::new(vec!["(intercept)".into(), "z".into(), "z2".into()], 100, values);
    let y = draw_binary(&mut r, &d2, &[0.0, 0.5, 0.0]);
    let err = fit_logistic(&d2, &y, &vec![1.0; 100], &FitOptions::default(), None).unwrap_err();
    assert!(matches!(err, GlmError::RankDeficient { .. }), "{err}");
}
