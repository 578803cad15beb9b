use serde::Serialize;

use super::{check_rank, check_weights, dot, newton, Design, Evaluation, FitOptions, GlmError};

/// Fitted three-category multinomial logistic regression with baseline
/// category 0: `log(π_k / π_0) = θ_k · x` for `k = 1, 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultinomialFit {
    pub names: Vec<String>,
    /// `θ_1` then `θ_2`, each of length `names.len()`.
    pub coefficients: [Vec<f64>; 2],
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
    pub log_likelihood: f64,
    #[serde(skip)]
    pub trace: Vec<f64>,
}

/// Category probabilities for linear predictors `(η_1, η_2)`.
#[inline]
pub(crate) fn softmax3(e1: f64, e2: f64) -> [f64; 3] {
    let m = e1.max(e2).max(0.0);
    let z0 = (-m).exp();
    let z1 = (e1 - m).exp();
    let z2 = (e2 - m).exp();
    let s = z0 + z1 + z2;
    [z0 / s, z1 / s, z2 / s]
}

#[inline]
fn log_norm(e1: f64, e2: f64) -> f64 {
    let m = e1.max(e2).max(0.0);
    m + ((-m).exp() + (e1 - m).exp() + (e2 - m).exp()).ln()
}

impl MultinomialFit {
    pub fn predict_row(&self, x: &[f64]) -> [f64; 3] {
        softmax3(dot(&self.coefficients[0], x), dot(&self.coefficients[1], x))
    }

    /// Parameters stacked as `[θ_1, θ_2]`.
    pub fn stacked(&self) -> Vec<f64> {
        let mut v = self.coefficients[0].clone();
        v.extend_from_slice(&self.coefficients[1]);
        v
    }
}

pub(crate) fn multinomial_loglik(design: &Design, y: &[u8], w: &[f64], theta: &[f64]) -> f64 {
    let q = design.cols();
    let (t1, t2) = theta.split_at(q);
    (0..design.rows())
        .map(|i| {
            let x = design.row(i);
            let e = [0.0, dot(t1, x), dot(t2, x)];
            w[i] * (e[y[i] as usize] - log_norm(e[1], e[2]))
        })
        .sum()
}

/// Log-likelihood and score (stacked `[θ_1, θ_2]`) at `theta`.
pub fn multinomial_score(design: &Design, y: &[u8], w: &[f64], theta: &[f64]) -> (f64, Vec<f64>) {
    let e = evaluate(design, y, w, theta);
    (e.loglik, e.score)
}

fn evaluate(design: &Design, y: &[u8], w: &[f64], theta: &[f64]) -> Evaluation {
    let q = design.cols();
    let d = 2 * q;
    let (t1, t2) = theta.split_at(q);
    let mut score = vec![0.0; d];
    let mut info = vec![0.0; d * d];
    let mut loglik = 0.0;
    for i in 0..design.rows() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let x = design.row(i);
        let e1 = dot(t1, x);
        let e2 = dot(t2, x);
        let e = [0.0, e1, e2];
        loglik += wi * (e[y[i] as usize] - log_norm(e1, e2));
        let p = softmax3(e1, e2);
        let r1 = wi * (f64::from(y[i] == 1) - p[1]);
        let r2 = wi * (f64::from(y[i] == 2) - p[2]);
        // Information blocks: w (p_k δ_kl − p_k p_l) x xᵀ.
        let v11 = wi * p[1] * (1.0 - p[1]);
        let v22 = wi * p[2] * (1.0 - p[2]);
        let v12 = -wi * p[1] * p[2];
        for a in 0..q {
            score[a] += r1 * x[a];
            score[q + a] += r2 * x[a];
            for b in a..q {
                let xx = x[a] * x[b];
                info[a * d + b] += v11 * xx;
                info[(q + a) * d + q + b] += v22 * xx;
            }
            for b in 0..q {
                info[a * d + q + b] += v12 * x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            info[a * d + b] = info[b * d + a];
        }
    }
    Evaluation { loglik, score, info }
}

/// Weighted multinomial regression of the category `response` (0, 1 or 2)
/// on the columns of `design`. `start` is a stacked `[θ_1, θ_2]` warm start.
pub fn fit_multinomial(
    design: &Design,
    response: &[u8],
    weights: &[f64],
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<MultinomialFit, GlmError> {
    let n = design.rows();
    if response.len() != n {
        return Err(GlmError::DimensionMismatch { expected: n, got: response.len() });
    }
    check_weights(weights, n)?;
    let mut by_cat = [0.0; 3];
    for (&y, &w) in response.iter().zip(weights) {
        match by_cat.get_mut(y as usize) {
            Some(c) => *c += w,
            None => return Err(GlmError::DimensionMismatch { expected: 3, got: y as usize + 1 }),
        }
    }
    if let Some(k) = by_cat.iter().position(|&c| c <= 0.0) {
        return Err(GlmError::AbsentCategory(k));
    }
    check_rank(design, weights)?;

    let q = design.cols();
    let start = match start {
        Some(s) if s.len() == 2 * q => s.to_vec(),
        Some(s) => return Err(GlmError::DimensionMismatch { expected: 2 * q, got: s.len() }),
        None => {
            // Intercept-only MLE as the starting point when the first column
            // is constant; otherwise zeros.
            let mut v = vec![0.0; 2 * q];
            if q > 0 && (0..n).all(|i| design.row(i)[0] == 1.0) {
                v[0] = (by_cat[1] / by_cat[0]).ln();
                v[q] = (by_cat[2] / by_cat[0]).ln();
            }
            v
        }
    };
    let total: f64 = weights.iter().sum();
    let out = newton(
        start,
        total,
        opts,
        |t| evaluate(design, response, weights, t),
        |t| multinomial_loglik(design, response, weights, t),
    )?;
    let (t1, t2) = out.params.split_at(q);
    Ok(MultinomialFit {
        names: design.names().to_vec(),
        coefficients: [t1.to_vec(), t2.to_vec()],
        converged: true,
        iterations: out.iterations,
        score_norm: out.score_norm,
        log_likelihood: *out.trace.last().expect("trace has the start value"),
        trace: out.trace,
    })
}
