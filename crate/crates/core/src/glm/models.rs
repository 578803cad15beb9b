//! The two nuisance models of the analysis: the multinomial outcome model
//! `log(π_k(a,x)/π_0(a,x)) = α_k + β_k a + γ_kᵀx` and the logistic exposure
//! model `logit e(x) = φ + ψᵀx`.

use serde::Serialize;

use super::multinomial::softmax3;
use super::{dot, fit_logistic, fit_multinomial, sigmoid, Design, FitOptions, GlmError};
use crate::data::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeModelFit {
    pub covariate_names: Vec<String>,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma: [Vec<f64>; 2],
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
    pub log_likelihood: f64,
}

impl OutcomeModelFit {
    /// Model with given coefficients, e.g. a data-generating mechanism.
    pub fn from_coefficients(alpha: [f64; 2], beta: [f64; 2], gamma: [Vec<f64>; 2]) -> Self {
        assert_eq!(gamma[0].len(), gamma[1].len(), "γ₁ and γ₂ must have equal length");
        let covariate_names = (1..=gamma[0].len()).map(|j| format!("x{j}")).collect();
        OutcomeModelFit {
            covariate_names,
            alpha,
            beta,
            gamma,
            converged: true,
            iterations: 0,
            score_norm: 0.0,
            log_likelihood: f64::NAN,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma[0].len()
    }

    /// `(π_0, π_1, π_2)` at exposure `a` and covariates `x`.
    pub fn predict_pi(&self, a: u8, x: &[f64]) -> Result<[f64; 3], GlmError> {
        if x.len() != self.dim() {
            return Err(GlmError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.pi(a, x))
    }

    /// [`predict_pi`](Self::predict_pi) without the dimension check.
    #[inline]
    pub fn pi(&self, a: u8, x: &[f64]) -> [f64; 3] {
        debug_assert_eq!(x.len(), self.dim());
        let a = f64::from(a);
        let e1 = self.alpha[0] + self.beta[0] * a + dot(&self.gamma[0], x);
        let e2 = self.alpha[1] + self.beta[1] * a + dot(&self.gamma[1], x);
        softmax3(e1, e2)
    }

    fn stacked(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.dim() + 2));
        for k in 0..2 {
            v.push(self.alpha[k]);
            v.push(self.beta[k]);
            v.extend_from_slice(&self.gamma[k]);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureModelFit {
    pub covariate_names: Vec<String>,
    /// φ
    pub intercept: f64,
    /// ψ
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
    pub log_likelihood: f64,
}

impl ExposureModelFit {
    pub fn from_coefficients(intercept: f64, coefficients: Vec<f64>) -> Self {
        let covariate_names = (1..=coefficients.len()).map(|j| format!("x{j}")).collect();
        ExposureModelFit {
            covariate_names,
            intercept,
            coefficients,
            converged: true,
            iterations: 0,
            score_norm: 0.0,
            log_likelihood: f64::NAN,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict_e(&self, x: &[f64]) -> Result<f64, GlmError> {
        if x.len() != self.dim() {
            return Err(GlmError::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(self.e(x))
    }

    #[inline]
    pub fn e(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        sigmoid(self.intercept + dot(&self.coefficients, x))
    }
}

fn outcome_design(data: &Dataset) -> Design {
    let mut names = vec!["(intercept)".to_string(), "A".to_string()];
    names.extend(data.covariate_names().iter().cloned());
    let mut values = Vec::with_capacity(data.len() * names.len());
    for i in 0..data.len() {
        values.push(1.0);
        values.push(f64::from(data.exposure()[i]));
        values.extend_from_slice(data.covariates(i));
    }
    Design::new(names, data.len(), values)
}

fn exposure_design(data: &Dataset) -> Design {
    let mut names = vec!["(intercept)".to_string()];
    names.extend(data.covariate_names().iter().cloned());
    let mut values = Vec::with_capacity(data.len() * names.len());
    for i in 0..data.len() {
        values.push(1.0);
        values.extend_from_slice(data.covariates(i));
    }
    Design::new(names, data.len(), values)
}

/// Fit the multinomial outcome model on a dataset without unknown subtypes.
pub fn fit_outcome_model(
    data: &Dataset,
    opts: &FitOptions,
    start: Option<&OutcomeModelFit>,
) -> crate::Result<OutcomeModelFit> {
    data.check_fittable()?;
    let design = outcome_design(data);
    let response: Vec<u8> =
        data.outcomes().iter().map(|o| o.category().expect("checked: no unknown subtypes") as u8).collect();
    let start = start.filter(|s| s.dim() == data.dim()).map(OutcomeModelFit::stacked);
    let fit = fit_multinomial(&design, &response, data.weights(), opts, start.as_deref())?;
    let [t1, t2] = &fit.coefficients;
    Ok(OutcomeModelFit {
        covariate_names: data.covariate_names().to_vec(),
        alpha: [t1[0], t2[0]],
        beta: [t1[1], t2[1]],
        gamma: [t1[2..].to_vec(), t2[2..].to_vec()],
        converged: fit.converged,
        iterations: fit.iterations,
        score_norm: fit.score_norm,
        log_likelihood: fit.log_likelihood,
    })
}

/// Fit the logistic propensity model `P(A = 1 | X)`.
pub fn fit_exposure_model(
    data: &Dataset,
    opts: &FitOptions,
    start: Option<&ExposureModelFit>,
) -> crate::Result<ExposureModelFit> {
    data.check_fittable()?;
    let design = exposure_design(data);
    let response: Vec<bool> = data.exposure().iter().map(|&a| a == 1).collect();
    let start: Option<Vec<f64>> = start.filter(|s| s.dim() == data.dim()).map(|s| {
        let mut v = vec![s.intercept];
        v.extend_from_slice(&s.coefficients);
        v
    });
    let fit = fit_logistic(&design, &response, data.weights(), opts, start.as_deref())?;
    Ok(ExposureModelFit {
        covariate_names: data.covariate_names().to_vec(),
        intercept: fit.coefficients[0],
        coefficients: fit.coefficients[1..].to_vec(),
        converged: fit.converged,
        iterations: fit.iterations,
        score_norm: fit.score_norm,
        log_likelihood: fit.log_likelihood,
    })
}
