use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Outcome};
use crate::glm::{fit_logistic, Design, FitOptions, LogisticFit};
use crate::stats::quantile_type7;

/// Logistic model for "subtype observed" among diseased units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissingnessModelSpec {
    /// Predictors, drawn from the covariates or the case covariates.
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default = "default_truncation")]
    pub truncation_quantile: f64,
}

fn default_truncation() -> f64 {
    0.99
}

impl Default for MissingnessModelSpec {
    fn default() -> Self {
        MissingnessModelSpec { covariates: Vec::new(), truncation_quantile: default_truncation() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingnessSummary {
    pub n_diseased: usize,
    pub n_observed: usize,
    pub n_removed: usize,
    pub raw_weight_min: f64,
    pub raw_weight_max: f64,
    pub truncation_threshold: f64,
    pub n_truncated: usize,
    /// `None` when every diseased unit already had its subtype recorded.
    pub model: Option<LogisticFit>,
}

impl MissingnessSummary {
    /// Summary for data that needed no weighting.
    pub fn none(data: &Dataset) -> Self {
        let n_diseased = data.outcomes().iter().filter(|o| o.is_diseased()).count();
        MissingnessSummary {
            n_diseased,
            n_observed: n_diseased,
            n_removed: 0,
            raw_weight_min: 1.0,
            raw_weight_max: 1.0,
            truncation_threshold: 1.0,
            n_truncated: 0,
            model: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedDataset {
    pub dataset: Dataset,
    pub summary: MissingnessSummary,
}

/// Inverse-probability weighting for missing subtypes.
///
/// Fits `P(subtype observed | Z)` among diseased units, gives every diseased
/// unit with a known subtype the weight `w / p̂`, where the inverse
/// probability is truncated at the requested empirical quantile (type 7) of
/// the raw inverse probabilities, and drops the units with unknown subtype.
/// Disease-free units are untouched.
pub fn missingness_weights(
    data: &Dataset,
    spec: &MissingnessModelSpec,
    opts: &FitOptions,
) -> Result<WeightedDataset, DataError> {
    let q = spec.truncation_quantile;
    if !(q > 0.0 && q <= 1.0) {
        return Err(DataError::InvalidTruncation(q));
    }
    let cols = spec
        .covariates
        .iter()
        .map(|name| data.column_lookup(name).ok_or_else(|| DataError::UnknownMissingnessCovariate(name.clone())))
        .collect::<Result<Vec<_>, _>>()?;

    let diseased: Vec<usize> = (0..data.len()).filter(|&i| data.outcomes()[i].is_diseased()).collect();
    if diseased.is_empty() {
        return Err(DataError::NoDiseased);
    }
    let observed = |i: usize| matches!(data.outcomes()[i], Outcome::Subtype1 | Outcome::Subtype2);
    let n_observed = diseased.iter().filter(|&&i| observed(i)).count();

    if n_observed == diseased.len() {
        return Ok(WeightedDataset { dataset: data.clone(), summary: MissingnessSummary::none(data) });
    }

    let mut names = vec!["(intercept)".to_string()];
    names.extend(spec.covariates.iter().cloned());
    let mut values = Vec::with_capacity(diseased.len() * names.len());
    for &i in &diseased {
        values.push(1.0);
        values.extend(cols.iter().map(|&c| data.column_value(i, c)));
    }
    let design = Design::new(names, diseased.len(), values);
    let response: Vec<bool> = diseased.iter().map(|&i| observed(i)).collect();
    let weights: Vec<f64> = diseased.iter().map(|&i| data.weights()[i]).collect();
    let fit = fit_logistic(&design, &response, &weights, opts, None).map_err(DataError::MissingnessFit)?;

    let mut raw = vec![f64::NAN; data.len()];
    for (row, &i) in diseased.iter().enumerate() {
        if response[row] {
            raw[i] = 1.0 / fit.predict_row(design.row(row));
        }
    }
    let raw_observed: Vec<f64> = raw.iter().copied().filter(|v| !v.is_nan()).collect();
    let threshold = quantile_type7(&raw_observed, q).expect("at least one observed subtype");
    let n_truncated = raw_observed.iter().filter(|&&r| r > threshold).count();
    let (raw_min, raw_max) =
        raw_observed.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));

    let dataset = data.filter_reweight(
        |i| data.outcomes()[i] != Outcome::UnknownSubtype,
        |i| if raw[i].is_nan() { data.weights()[i] } else { data.weights()[i] * raw[i].min(threshold) },
    );
    Ok(WeightedDataset {
        summary: MissingnessSummary {
            n_diseased: diseased.len(),
            n_observed,
            n_removed: diseased.len() - n_observed,
            raw_weight_min: raw_min,
            raw_weight_max: raw_max,
            truncation_threshold: threshold,
            n_truncated,
            model: Some(fit),
        },
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Unit;

    fn ds(outcomes: &[u8]) -> Dataset {
        let units = outcomes
            .iter()
            .enumerate()
            .map(|(i, &y)| Unit::new((i % 2) as u8, vec![i as f64], Outcome::from_code(y).unwrap()))
            .collect();
        Dataset::from_units(vec!["x".into()], units).unwrap()
    }

    #[test]
    fn no_missingness_is_identity() {
        let data = ds(&[0, 1, 2, 0, 1]);
        let out = missingness_weights(&data, &MissingnessModelSpec::default(), &FitOptions::default()).unwrap();
        assert_eq!(out.dataset, data);
        assert_eq!(out.summary.n_removed, 0);
        assert!(out.dataset.weights().iter().all(|&w| w == 1.0));
    }

    #[test]
    fn intercept_only_three_of_four_observed() {
        let data = ds(&[0, 1, 2, 9, 1, 0]);
        let out = missingness_weights(&data, &MissingnessModelSpec::default(), &FitOptions::default()).unwrap();
        assert_eq!(out.dataset.len(), 5);
        assert_eq!(out.dataset.count_unknown_subtype(), 0);
        for u in out.dataset.units() {
            let expected = if u.outcome.is_diseased() { 4.0 / 3.0 } else { 1.0 };
            assert!((u.weight - expected).abs() < 1e-12, "{} vs {}", u.weight, expected);
        }
        assert_eq!(out.summary.n_truncated, 0);
    }

    #[test]
    fn no_diseased_units() {
        let data = ds(&[0, 0]);
        assert!(matches!(
            missingness_weights(&data, &MissingnessModelSpec::default(), &FitOptions::default()),
            Err(DataError::NoDiseased)
        ));
    }

    #[test]
    fn bad_quantile_and_unknown_covariate() {
        let data = ds(&[0, 1, 9]);
        let spec = MissingnessModelSpec { covariates: vec![], truncation_quantile: 0.0 };
        assert!(matches!(
            missingness_weights(&data, &spec, &FitOptions::default()),
            Err(DataError::InvalidTruncation(_))
        ));
        let spec = MissingnessModelSpec { covariates: vec!["stage".into()], truncation_quantile: 0.99 };
        assert!(matches!(
            missingness_weights(&data, &spec, &FitOptions::default()),
            Err(DataError::UnknownMissingnessCovariate(_))
        ));
    }
}
