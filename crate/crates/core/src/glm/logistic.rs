use serde::Serialize;

use super::{check_rank, check_weights, dot, log1p_exp, newton, sigmoid, Design, Evaluation, FitOptions, GlmError};

/// Fitted binary logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted Newton step, starting value first.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

impl LogisticFit {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.coefficients, x))
    }
}

pub(crate) fn logistic_loglik(design: &Design, y: &[bool], w: &[f64], beta: &[f64]) -> f64 {
    (0..design.rows())
        .map(|i| {
            let eta = dot(beta, design.row(i));
            w[i] * (if y[i] { eta } else { 0.0 } - log1p_exp(eta))
        })
        .sum()
}

/// Log-likelihood and score at `beta`.
pub fn logistic_score(design: &Design, y: &[bool], w: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let e = evaluate(design, y, w, beta);
    (e.loglik, e.score)
}

fn evaluate(design: &Design, y: &[bool], w: &[f64], beta: &[f64]) -> Evaluation {
    let p = design.cols();
    let mut score = vec![0.0; p];
    let mut info = vec![0.0; p * p];
    let mut loglik = 0.0;
    for i in 0..design.rows() {
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        let x = design.row(i);
        let eta = dot(beta, x);
        let mu = sigmoid(eta);
        let yi = if y[i] { 1.0 } else { 0.0 };
        loglik += wi * (yi * eta - log1p_exp(eta));
        let r = wi * (yi - mu);
        let v = wi * mu * (1.0 - mu);
        for a in 0..p {
            score[a] += r * x[a];
            let va = v * x[a];
            for b in a..p {
                info[a * p + b] += va * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[a * p + b] = info[b * p + a];
        }
    }
    Evaluation { loglik, score, info }
}

/// Weighted logistic regression of `response` on the columns of `design`
/// (include an intercept column explicitly).
///
/// `start` warm-starts the iteration, e.g. from a fit on the full data when
/// refitting a bootstrap replicate.
pub fn fit_logistic(
    design: &Design,
    response: &[bool],
    weights: &[f64],
    opts: &FitOptions,
    start: Option<&[f64]>,
) -> Result<LogisticFit, GlmError> {
    let n = design.rows();
    if response.len() != n {
        return Err(GlmError::DimensionMismatch { expected: n, got: response.len() });
    }
    let total = check_weights(weights, n)?;
    let pos: f64 = response.iter().zip(weights).filter(|(y, _)| **y).map(|(_, w)| w).sum();
    if pos <= 0.0 || pos >= total {
        return Err(GlmError::ConstantResponse);
    }
    check_rank(design, weights)?;

    let p = design.cols();
    let start = match start {
        Some(s) if s.len() == p => s.to_vec(),
        Some(s) => return Err(GlmError::DimensionMismatch { expected: p, got: s.len() }),
        None => {
            // Intercept-only MLE when the first column is constant 1.
            let mut b = vec![0.0; p];
            if (0..n).all(|i| design.row(i)[0] == 1.0) {
                b[0] = (pos / (total - pos)).ln();
            }
            b
        }
    };
    let out = newton(
        start,
        total,
        opts,
        |b| evaluate(design, response, weights, b),
        |b| logistic_loglik(design, response, weights, b),
    )?;
    Ok(LogisticFit {
        names: design.names().to_vec(),
        log_likelihood: *out.trace.last().expect("trace has the start value"),
        coefficients: out.params,
        converged: true,
        iterations: out.iterations,
        score_norm: out.score_norm,
        trace: out.trace,
    })
}
