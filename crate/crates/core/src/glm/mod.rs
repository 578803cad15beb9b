//! Weighted maximum-likelihood fitting by Newton–Raphson with step halving.
//!
//! Two likelihoods are supported: binary logistic (propensity score and the
//! missing-subtype model) and three-category multinomial logistic with
//! baseline category 0 (the outcome model). Both share the same driver:
//! rank check on the weighted design, Newton direction from a Cholesky solve
//! of the information matrix, step halving until the log-likelihood does not
//! decrease, and a coefficient bound that turns divergence under separation
//! into an error.

mod logistic;
mod models;
pub(crate) mod multinomial;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logistic::{fit_logistic, logistic_score, LogisticFit};
pub use models::{fit_exposure_model, fit_outcome_model, ExposureModelFit, OutcomeModelFit};
pub use multinomial::{fit_multinomial, multinomial_score, MultinomialFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlmError {
    #[error("response is constant; nothing to fit")]
    ConstantResponse,
    #[error("outcome category {0} is absent from the data")]
    AbsentCategory(usize),
    #[error("design matrix is rank deficient (reciprocal condition {rcond:.3e})")]
    RankDeficient { rcond: f64 },
    #[error("separation detected: coefficient magnitude {magnitude:.1} exceeds {bound} after {iterations} iterations")]
    Separation { magnitude: f64, bound: f64, iterations: usize },
    #[error("no convergence after {iterations} iterations (score norm {score_norm:.3e})")]
    NonConvergence { iterations: usize, score_norm: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("weights must be finite and nonnegative with positive total")]
    InvalidWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Convergence threshold on the max-norm of the score of the weighted
    /// mean log-likelihood.
    pub tol: f64,
    pub max_iter: usize,
    /// Any coefficient exceeding this magnitude (logit scale) is reported as
    /// separation.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { tol: 1e-9, max_iter: 100, separation_bound: 30.0 }
    }
}

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    rows: usize,
    values: Vec<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, rows: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), rows * names.len(), "design values do not match shape");
        Design { names, rows, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.cols();
        &self.values[i * p..(i + 1) * p]
    }
}

fn check_weights(weights: &[f64], n: usize) -> Result<f64, GlmError> {
    if weights.len() != n {
        return Err(GlmError::DimensionMismatch { expected: n, got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GlmError::InvalidWeights);
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(GlmError::InvalidWeights);
    }
    Ok(total)
}

/// Rank check on XᵀWX scaled to unit diagonal.
fn check_rank(design: &Design, weights: &[f64]) -> Result<(), GlmError> {
    let p = design.cols();
    let mut m = vec![0.0; p * p];
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let x = design.row(i);
        for a in 0..p {
            let wa = w * x[a];
            for b in a..p {
                m[a * p + b] += wa * x[b];
            }
        }
    }
    let diag: Vec<f64> = (0..p).map(|a| m[a * p + a]).collect();
    if diag.iter().any(|&d| d <= 0.0) {
        return Err(GlmError::RankDeficient { rcond: 0.0 });
    }
    let scaled = DMatrix::from_fn(p, p, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        m[lo * p + hi] / (diag[a] * diag[b]).sqrt()
    });
    let eig = SymmetricEigen::new(scaled).eigenvalues;
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let rcond = min / max;
    if rcond < 1e-11 {
        return Err(GlmError::RankDeficient { rcond });
    }
    Ok(())
}

/// Solve `info · step = score` for a symmetric positive definite `info`
/// stored as a full row-major matrix. `None` if not numerically PD.
fn newton_direction(info: &[f64], score: &[f64]) -> Option<Vec<f64>> {
    let d = score.len();
    let m = DMatrix::from_row_slice(d, d, info);
    let chol = m.cholesky()?;
    let step = chol.solve(&DVector::from_column_slice(score));
    step.iter().all(|v| v.is_finite()).then(|| step.iter().copied().collect())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Evaluation of a log-likelihood at one parameter vector.
struct Evaluation {
    loglik: f64,
    score: Vec<f64>,
    info: Vec<f64>,
}

/// Shared Newton driver. `eval` returns the weighted log-likelihood, its
/// gradient and the (positive) information matrix; `loglik` evaluates the
/// log-likelihood alone for line-search trials.
struct NewtonOutcome {
    params: Vec<f64>,
    iterations: usize,
    score_norm: f64,
    trace: Vec<f64>,
}

fn newton<E, L>(
    start: Vec<f64>,
    total_weight: f64,
    opts: &FitOptions,
    eval: E,
    loglik: L,
) -> Result<NewtonOutcome, GlmError>
where
    E: Fn(&[f64]) -> Evaluation,
    L: Fn(&[f64]) -> f64,
{
    let mut params = start;
    let mut trace = Vec::new();
    let mut current = eval(&params);
    trace.push(current.loglik);
    let mut iterations = 0;
    loop {
        let score_norm = max_abs(&current.score) / total_weight;
        if score_norm < opts.tol {
            // One polishing step: quadratic convergence takes the residual
            // to rounding level for the price of one evaluation.
            if let Some(step) = newton_direction(&current.info, &current.score) {
                let polished: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
                let e = eval(&polished);
                let norm = max_abs(&e.score) / total_weight;
                if e.loglik.is_finite()
                    && e.loglik >= current.loglik - 1e-12 * current.loglik.abs().max(1.0)
                    && norm <= score_norm
                {
                    trace.push(e.loglik);
                    return Ok(NewtonOutcome { params: polished, iterations: iterations + 1, score_norm: norm, trace });
                }
            }
            return Ok(NewtonOutcome { params, iterations, score_norm, trace });
        }
        if iterations >= opts.max_iter {
            return Err(GlmError::NonConvergence { iterations, score_norm });
        }
        let magnitude = max_abs(&params);
        let Some(step) = newton_direction(&current.info, &current.score) else {
            // The design passed the rank check, so a singular information
            // matrix means fitted probabilities have collapsed to 0 or 1.
            return Err(GlmError::Separation { magnitude, bound: opts.separation_bound, iterations });
        };
        let floor = current.loglik - 1e-12 * current.loglik.abs().max(1.0);
        let ok = |ll: f64| ll.is_finite() && ll >= floor;
        iterations += 1;
        // Full step first with a complete evaluation, which is reused as the
        // next iterate in the common case; halve with likelihood-only trials.
        let full: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + s).collect();
        let full_eval = eval(&full);
        let next = if ok(full_eval.loglik) {
            Some((full, Some(full_eval)))
        } else {
            let mut scale = 0.5;
            let mut found = None;
            for _ in 0..40 {
                let trial: Vec<f64> = params.iter().zip(&step).map(|(p, s)| p + scale * s).collect();
                if ok(loglik(&trial)) {
                    found = Some((trial, None));
                    break;
                }
                scale *= 0.5;
            }
            found
        };
        let Some((trial, evaluated)) = next else {
            // No ascent possible along the Newton direction: we are at the
            // optimum to rounding precision.
            let score_norm = max_abs(&current.score) / total_weight;
            if score_norm < opts.tol.sqrt() {
                return Ok(NewtonOutcome { params, iterations, score_norm, trace });
            }
            return Err(GlmError::NonConvergence { iterations, score_norm });
        };
        params = trial;
        let magnitude = max_abs(&params);
        if magnitude > opts.separation_bound {
            return Err(GlmError::Separation { magnitude, bound: opts.separation_bound, iterations });
        }
        current = match evaluated {
            Some(e) => e,
            None => eval(&params),
        };
        trace.push(current.loglik);
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub(crate) fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
