//! Estimators of the counterfactual marginals `p_k(a)`.
//!
//! All sums are weighted by the unit weights carried on the dataset and
//! normalized by their total, so missing-subtype weights flow through every
//! method in the same way.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::glm::{ExposureModelFit, GlmError, OutcomeModelFit};
use crate::identification::{ComponentSet, IdentificationError, Scale, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodLabel {
    #[serde(rename = "stand")]
    Standardization,
    #[serde(rename = "iptw")]
    Iptw,
    #[serde(rename = "dr")]
    Dr,
}

impl MethodLabel {
    pub const ALL: [MethodLabel; 3] = [MethodLabel::Standardization, MethodLabel::Iptw, MethodLabel::Dr];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodLabel::Standardization => "stand",
            MethodLabel::Iptw => "iptw",
            MethodLabel::Dr => "dr",
        }
    }

    pub fn needs_outcome_model(self) -> bool {
        matches!(self, MethodLabel::Standardization | MethodLabel::Dr)
    }

    pub fn needs_exposure_model(self) -> bool {
        matches!(self, MethodLabel::Iptw | MethodLabel::Dr)
    }
}

impl FromStr for MethodLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stand" | "standardization" => Ok(MethodLabel::Standardization),
            "iptw" => Ok(MethodLabel::Iptw),
            "dr" | "aipw" => Ok(MethodLabel::Dr),
            other => Err(format!("unknown method `{other}` (expected stand, iptw or dr)")),
        }
    }
}

impl fmt::Display for MethodLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Augmentation term of the doubly-robust estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Augmentation {
    /// Per-unit predictions `π_k(a, X_i)`: the standard AIPW estimator,
    /// consistent if either nuisance model is correct.
    #[default]
    Unit,
    /// Sample-average predictions `m̄_ka` in place of `π_k(a, X_i)`.
    Mean,
    /// As `Mean`, but the `a = 0` term also uses `m̄_k1`.
    MeanLiteral,
}

impl FromStr for Augmentation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "unit" => Ok(Augmentation::Unit),
            "mean" => Ok(Augmentation::Mean),
            "mean_literal" => Ok(Augmentation::MeanLiteral),
            other => Err(format!("unknown augmentation `{other}` (expected unit, mean or mean_literal)")),
        }
    }
}

/// Propensity scores are truncated to `[lo, hi]` before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropensityClip {
    pub lo: f64,
    pub hi: f64,
}

impl Default for PropensityClip {
    fn default() -> Self {
        PropensityClip { lo: 0.01, hi: 0.99 }
    }
}

impl PropensityClip {
    pub fn none() -> Self {
        PropensityClip { lo: 0.0, hi: 1.0 }
    }

    /// Clipped value and whether clipping happened.
    #[inline]
    pub fn apply(&self, e: f64) -> (f64, bool) {
        if e < self.lo {
            (self.lo, true)
        } else if e > self.hi {
            (self.hi, true)
        } else {
            (e, false)
        }
    }
}

/// Marginals from a propensity-based estimator, with the number of units
/// whose propensity score was clipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropensityComponents {
    pub components: ComponentSet,
    pub n_clipped: usize,
}

/// Model predictions for every unit at both exposure levels. Computing them
/// once lets all three estimators share the work.
#[derive(Debug, Clone, Default)]
pub struct Predictions {
    /// `π(0, X_i)`, `π(1, X_i)`.
    pub pi: Option<[Vec<[f64; 3]>; 2]>,
    /// Clipped `ê(X_i)`.
    pub e: Option<Vec<f64>>,
    pub n_clipped: usize,
}

impl Predictions {
    pub fn new(
        data: &Dataset,
        outcome: Option<&OutcomeModelFit>,
        exposure: Option<&ExposureModelFit>,
        clip: PropensityClip,
    ) -> Result<Self, GlmError> {
        let mut out = Predictions::default();
        if let Some(fit) = outcome {
            check_dim(fit.dim(), data)?;
            let pi0 = (0..data.len()).map(|i| fit.pi(0, data.covariates(i))).collect();
            let pi1 = (0..data.len()).map(|i| fit.pi(1, data.covariates(i))).collect();
            out.pi = Some([pi0, pi1]);
        }
        if let Some(fit) = exposure {
            check_dim(fit.dim(), data)?;
            let mut clipped = 0;
            let e = (0..data.len())
                .map(|i| {
                    let (v, c) = clip.apply(fit.e(data.covariates(i)));
                    clipped += usize::from(c);
                    v
                })
                .collect();
            out.e = Some(e);
            out.n_clipped = clipped;
        }
        Ok(out)
    }
}

fn check_dim(expected: usize, data: &Dataset) -> Result<(), GlmError> {
    if data.dim() != expected {
        return Err(GlmError::DimensionMismatch { expected, got: data.dim() });
    }
    Ok(())
}

/// `Σ w_i f(i) / Σ w_i`.
fn weighted_mean(data: &Dataset, f: impl Fn(usize) -> f64) -> f64 {
    let w = data.weights();
    let total: f64 = w.iter().sum();
    (0..data.len()).map(|i| w[i] * f(i)).sum::<f64>() / total
}

fn set_from(f: impl Fn(Subtype, u8) -> f64) -> ComponentSet {
    ComponentSet::new(f(Subtype::One, 0), f(Subtype::One, 1), f(Subtype::Two, 0), f(Subtype::Two, 1))
}

/// Standardization from precomputed predictions.
pub fn standardization_from(pi: &[Vec<[f64; 3]>; 2], data: &Dataset) -> ComponentSet {
    set_from(|k, a| weighted_mean(data, |i| pi[a as usize][i][k.index()]))
}

/// IPTW from precomputed (clipped) propensity scores.
pub fn iptw_from(e: &[f64], data: &Dataset) -> ComponentSet {
    let (a, y) = (data.exposure(), data.outcomes());
    set_from(|k, arm| {
        weighted_mean(data, |i| {
            if a[i] != arm {
                return 0.0;
            }
            let y = y[i].indicator(k.index());
            if arm == 1 {
                y / e[i]
            } else {
                y / (1.0 - e[i])
            }
        })
    })
}

/// Doubly-robust estimator from precomputed predictions.
pub fn dr_from(pi: &[Vec<[f64; 3]>; 2], e: &[f64], data: &Dataset, augmentation: Augmentation) -> ComponentSet {
    let (a, y) = (data.exposure(), data.outcomes());
    let m = |k: Subtype, arm: u8| weighted_mean(data, |i| pi[arm as usize][i][k.index()]);
    set_from(|k, arm| {
        let kk = k.index();
        let mbar = match (augmentation, arm) {
            (Augmentation::Unit, _) => None,
            (Augmentation::Mean, _) | (Augmentation::MeanLiteral, 1) => Some(m(k, arm)),
            (Augmentation::MeanLiteral, _) => Some(m(k, 1)),
        };
        weighted_mean(data, |i| {
            let ai = f64::from(a[i]);
            let yi = y[i].indicator(kk);
            let pred = mbar.unwrap_or(pi[arm as usize][i][kk]);
            if arm == 1 {
                (ai * yi - (ai - e[i]) * pred) / e[i]
            } else {
                ((1.0 - ai) * yi + (ai - e[i]) * pred) / (1.0 - e[i])
            }
        })
    })
}

/// Standardization: `p̂_k(a)` is the weighted mean of `π_k(a, X_i)` over
/// all units.
pub fn components_standardization(fit: &OutcomeModelFit, data: &Dataset) -> Result<ComponentSet, GlmError> {
    let p = Predictions::new(data, Some(fit), None, PropensityClip::none())?;
    Ok(standardization_from(p.pi.as_ref().expect("outcome predictions"), data))
}

/// Inverse probability of treatment weighting.
pub fn components_iptw(
    fit: &ExposureModelFit,
    data: &Dataset,
    clip: PropensityClip,
) -> Result<PropensityComponents, GlmError> {
    let p = Predictions::new(data, None, Some(fit), clip)?;
    Ok(PropensityComponents {
        components: iptw_from(p.e.as_ref().expect("propensity predictions"), data),
        n_clipped: p.n_clipped,
    })
}

/// Augmented IPTW.
pub fn components_dr(
    fit_y: &OutcomeModelFit,
    fit_a: &ExposureModelFit,
    data: &Dataset,
    clip: PropensityClip,
    augmentation: Augmentation,
) -> Result<PropensityComponents, GlmError> {
    let p = Predictions::new(data, Some(fit_y), Some(fit_a), clip)?;
    Ok(PropensityComponents {
        components: dr_from(p.pi.as_ref().expect("outcome"), p.e.as_ref().expect("propensity"), data, augmentation),
        n_clipped: p.n_clipped,
    })
}

/// Conditional estimand from precomputed predictions: the contrast of the
/// subtype-k risk among those free of the other subtype.
pub fn conditional_from(
    pi: &[Vec<[f64; 3]>; 2],
    data: &Dataset,
    subtype: Subtype,
    scale: Scale,
) -> Result<f64, IdentificationError> {
    let (k, other) = (subtype.index(), subtype.other().index());
    let degenerate = pi.iter().flatten().any(|p| 1.0 - p[other] <= 0.0);
    let arm = |a: usize| weighted_mean(data, |i| pi[a][i][k] / (1.0 - pi[a][i][other]));
    let (m1, m0) = (arm(1), arm(0));
    if degenerate {
        return Err(IdentificationError::ZeroDenominator { what: "1 − π of the other subtype" });
    }
    match scale {
        Scale::Diff => Ok(m1 - m0),
        Scale::Rr if m0 == 0.0 => Err(IdentificationError::ZeroDenominator { what: "conditional risk at a = 0" }),
        Scale::Rr => Ok(m1 / m0),
    }
}

/// `E_X[π_k(1,X) / (1 − π_k'(1,X))]` contrasted with the same at `a = 0`;
/// the difference for `Scale::Diff`, the ratio for `Scale::Rr`.
pub fn conditional_estimand(
    fit: &OutcomeModelFit,
    data: &Dataset,
    subtype: Subtype,
    scale: Scale,
) -> crate::Result<f64> {
    let p = Predictions::new(data, Some(fit), None, PropensityClip::none())?;
    Ok(conditional_from(p.pi.as_ref().expect("outcome predictions"), data, subtype, scale)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Outcome, Unit};

    fn data(rows: &[(u8, f64, u8)]) -> Dataset {
        let units = rows.iter().map(|&(a, x, y)| Unit::new(a, vec![x], Outcome::from_code(y).unwrap())).collect();
        Dataset::from_units(vec!["x".into()], units).unwrap()
    }

    #[test]
    fn constant_propensity_half() {
        // 10 rows, exposed subtype-1 cases: 3.
        let d = data(&[
            (1, 0.0, 1),
            (1, 0.0, 1),
            (1, 0.0, 1),
            (1, 0.0, 0),
            (1, 0.0, 2),
            (0, 0.0, 1),
            (0, 0.0, 0),
            (0, 0.0, 0),
            (0, 0.0, 2),
            (0, 0.0, 0),
        ]);
        let e = ExposureModelFit::from_coefficients(0.0, vec![0.0]);
        let out = components_iptw(&e, &d, PropensityClip::default()).unwrap();
        assert!((out.components.p1_1 - 2.0 * 3.0 / 10.0).abs() < 1e-15);
        assert!((out.components.p2_1 - 2.0 * 1.0 / 10.0).abs() < 1e-15);
        assert!((out.components.p1_0 - 2.0 * 1.0 / 10.0).abs() < 1e-15);
        assert_eq!(out.n_clipped, 0);
    }

    #[test]
    fn no_exposed_cases_gives_zero() {
        let d = data(&[(1, 0.0, 0), (0, 0.0, 1), (0, 1.0, 2)]);
        let e = ExposureModelFit::from_coefficients(0.3, vec![0.1]);
        let out = components_iptw(&e, &d, PropensityClip::default()).unwrap();
        assert_eq!(out.components.p1_1, 0.0);
        assert_eq!(out.components.p2_1, 0.0);
    }

    #[test]
    fn two_row_dr_hand_example() {
        // ê ≡ 0.5, rows (A=1, Y¹=1), (A=0, Y¹=0); with mean augmentation
        // m̄₁₁ = 0.4 gives ½[2 − 0.4] + ½[0 + 0.4] = 1.
        let d = data(&[(1, 0.0, 1), (0, 0.0, 0)]);
        let pi1 = [0.6, 0.4, 0.0];
        let pi = [vec![[0.7, 0.2, 0.1]; 2], vec![pi1; 2]];
        let e = vec![0.5, 0.5];
        let c = dr_from(&pi, &e, &d, Augmentation::Mean);
        assert!((c.p1_1 - 1.0).abs() < 1e-15);
        let c = dr_from(&pi, &e, &d, Augmentation::Unit);
        assert!((c.p1_1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dr_equals_iptw_when_predictions_vanish() {
        let d = data(&[(1, 0.2, 1), (0, -1.0, 0), (1, 0.4, 2), (0, 1.3, 1), (1, 0.0, 0)]);
        let pi = [vec![[1.0, 0.0, 0.0]; 5], vec![[1.0, 0.0, 0.0]; 5]];
        let e = vec![0.3, 0.6, 0.5, 0.2, 0.7];
        for aug in [Augmentation::Unit, Augmentation::Mean, Augmentation::MeanLiteral] {
            assert_eq!(dr_from(&pi, &e, &d, aug), iptw_from(&e, &d));
        }
    }

    #[test]
    fn standardization_constant_covariates() {
        let d = data(&[(1, 2.0, 1), (0, 2.0, 0), (1, 2.0, 2), (0, 2.0, 0)]);
        let fit = OutcomeModelFit::from_coefficients([-1.0, -2.0], [0.5, 0.3], [vec![0.1], vec![-0.2]]);
        let c = components_standardization(&fit, &d).unwrap();
        let p0 = fit.pi(0, &[2.0]);
        let p1 = fit.pi(1, &[2.0]);
        assert!((c.p1_0 - p0[1]).abs() < 1e-15);
        assert!((c.p2_1 - p1[2]).abs() < 1e-15);
    }

    #[test]
    fn conditional_without_competing_subtype_is_total_effect() {
        let d = data(&[(1, 0.3, 1), (0, -0.5, 0), (1, 1.0, 0)]);
        let pi = [
            vec![[0.9, 0.1, 0.0], [0.8, 0.2, 0.0], [0.95, 0.05, 0.0]],
            vec![[0.7, 0.3, 0.0], [0.6, 0.4, 0.0], [0.5, 0.5, 0.0]],
        ];
        let cond = conditional_from(&pi, &d, Subtype::One, Scale::Diff).unwrap();
        let c = standardization_from(&pi, &d);
        assert_eq!(cond, c.p1_1 - c.p1_0);
    }

    #[test]
    fn conditional_hand_computed() {
        let d = data(&[(0, 0.0, 0), (1, 0.0, 1)]);
        let fit = OutcomeModelFit::from_coefficients([0.1_f64.ln(), 0.05_f64.ln()], [0.5, 0.2], [vec![0.0], vec![0.0]]);
        let p0 = fit.pi(0, &[0.0]);
        let p1 = fit.pi(1, &[0.0]);
        let expected = p1[1] / (1.0 - p1[2]) - p0[1] / (1.0 - p0[2]);
        // With two categories left, π₁/(1 − π₂) = π₁/(π₀ + π₁) = 1/(1 + e^{−η₁}).
        let direct = 1.0 / (1.0 + (-(0.1_f64.ln() + 0.5)).exp()) - 1.0 / (1.0 + 10.0);
        let got = conditional_estimand(&fit, &d, Subtype::One, Scale::Diff).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - direct).abs() < 1e-14);
    }

    #[test]
    fn clipping_counts() {
        let d = data(&[(1, 10.0, 1), (0, -10.0, 0), (1, 0.0, 2), (0, 0.0, 0)]);
        let e = ExposureModelFit::from_coefficients(0.0, vec![1.0]);
        let out = components_iptw(&e, &d, PropensityClip::default()).unwrap();
        assert_eq!(out.n_clipped, 2);
    }

    #[test]
    fn parse_labels() {
        assert_eq!("DR".parse::<MethodLabel>().unwrap(), MethodLabel::Dr);
        assert_eq!("mean-literal".parse::<Augmentation>().unwrap(), Augmentation::MeanLiteral);
        assert!("foo".parse::<MethodLabel>().is_err());
    }
}
