//! Effects over grids of the subtype-switching probabilities.
//!
//! The nuisance models do not depend on `λ`, so a grid costs one analysis
//! and one bootstrap: replicate component bundles are computed once and every
//! cell re-evaluates only the identification formulas on them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, effects, AnalysisOptions, EffectKey, EffectRequest, FitCounts, MethodSet};
use crate::data::Dataset;
use crate::estimators::MethodLabel;
use crate::identification::{lambda_bounds, Estimand, Scale, SensitivityParams};
use crate::inference::{bootstrap_bundles, summarize, BootstrapPlan, ReplicateFailure};
use crate::profiles::AssumptionCombo;
use crate::stats::two_sided_z;

/// Values taken by one sensitivity parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    Fixed(f64),
    Range { lo: f64, hi: f64, step: f64 },
}

impl Axis {
    /// Grid values, `lo, lo + step, …` up to `hi` inclusive (with a small
    /// tolerance so that `0:0.1:0.05` has three points).
    pub fn values(&self) -> Vec<f64> {
        match *self {
            Axis::Fixed(v) => vec![v],
            Axis::Range { lo, hi, step } => {
                let n = ((hi - lo) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| round12(lo + i as f64 * step)).collect()
            }
        }
    }

    pub fn validate(&self, name: &str) -> Result<(), String> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            Axis::Fixed(v) if in_unit(v) => Ok(()),
            Axis::Fixed(v) => Err(format!("{name} = {v} must lie in [0, 1]")),
            Axis::Range { lo, hi, step } => {
                if !(in_unit(lo) && in_unit(hi) && lo <= hi) {
                    Err(format!("{name} range {lo}:{hi} must satisfy 0 ≤ lo ≤ hi ≤ 1"))
                } else if !(step > 0.0 && step.is_finite()) {
                    Err(format!("{name} step must be positive, got {step}"))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn upper(&self) -> f64 {
        match *self {
            Axis::Fixed(v) => v,
            Axis::Range { hi, .. } => hi,
        }
    }
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

impl FromStr for Axis {
    type Err = String;
    /// `v` or `lo:hi:step`.
    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("cannot parse `{t}` as a number"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Axis::Fixed(num(v)?)),
            [lo, hi, step] => Ok(Axis::Range { lo: num(lo)?, hi: num(hi)?, step: num(step)? }),
            _ => Err(format!("expected a value or lo:hi:step, got `{s}`")),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Fixed(v) => write!(f, "{v}"),
            Axis::Range { lo, hi, step } => write!(f, "{lo}:{hi}:{step}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda1: Axis,
    pub lambda2: Axis,
    pub lambda1_0: f64,
    pub lambda2_0: f64,
    pub combo: AssumptionCombo,
    pub scale: Scale,
    pub method: MethodLabel,
    pub alpha: f64,
    /// Shrink the grid to the data-driven `λ` bounds of the point estimate.
    pub clip_to_bounds: bool,
}

impl GridSpec {
    pub fn new(lambda1: Axis, lambda2: Axis, combo: AssumptionCombo, scale: Scale, method: MethodLabel) -> Self {
        GridSpec {
            lambda1,
            lambda2,
            lambda1_0: 0.0,
            lambda2_0: 0.0,
            combo,
            scale,
            method,
            alpha: 0.05,
            clip_to_bounds: false,
        }
    }

    /// Checks ranges and the combination's zero constraints.
    pub fn validate(&self) -> crate::Result<()> {
        self.lambda1.validate("lambda1").map_err(crate::Error::Config)?;
        self.lambda2.validate("lambda2").map_err(crate::Error::Config)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(crate::Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        // Any nonzero value on a constrained axis is rejected.
        let p = SensitivityParams {
            lambda1: self.lambda1.upper(),
            lambda2: self.lambda2.upper(),
            lambda1_0: self.lambda1_0,
            lambda2_0: self.lambda2_0,
        };
        p.validate_against(self.combo)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub estimand: Estimand,
    pub scale: Scale,
    pub method: MethodLabel,
    pub point: Option<f64>,
    pub se: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub significant: bool,
    /// Replicates whose value was undefined for this cell (for example `λ`
    /// above the replicate's bound).
    pub n_dropped: usize,
    /// Why the point estimate is undefined, if it is.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub rows: Vec<GridRow>,
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub lambda_bounds: Option<(f64, f64)>,
    pub warnings: Vec<String>,
    pub counts: FitCounts,
    pub bootstrap_failures: Vec<ReplicateFailure>,
    pub alpha: f64,
}

const GRID_ESTIMANDS: [Estimand; 3] = [Estimand::Sface1, Estimand::Sface2, Estimand::Theta];

pub fn run_grid(
    data: &Dataset,
    spec: &GridSpec,
    plan: &BootstrapPlan,
    opts: &AnalysisOptions,
) -> crate::Result<GridResult> {
    spec.validate()?;
    let methods = MethodSet::new([spec.method]);
    let analysis = analyze(data, &methods, opts, None)?;
    let c = *analysis.bundle.get(spec.method).expect("requested method present");
    let bounds = lambda_bounds(&c).ok();
    let mut warnings = analysis.warnings.clone();

    let mut l1 = spec.lambda1.values();
    let mut l2 = spec.lambda2.values();
    if spec.clip_to_bounds {
        match bounds {
            Some((b1, b2)) => {
                for (vals, b, name) in [(&mut l1, b1, "lambda1"), (&mut l2, b2, "lambda2")] {
                    let before = vals.len();
                    vals.retain(|v| *v <= b);
                    if vals.len() < before {
                        warnings.push(format!(
                            "{name} grid truncated at its data-driven bound {b:.6}: {} of {before} values kept",
                            vals.len()
                        ));
                    }
                }
            }
            None => warnings.push("lambda bounds undefined (zero marginal); grid not clipped".into()),
        }
    }

    let reps =
        if plan.n_reps > 0 { Some(bootstrap_bundles(data, &methods, opts, plan, Some(&analysis.fits))?) } else { None };
    let z = two_sided_z(spec.alpha);
    let cells: Vec<(f64, f64)> = l2.iter().flat_map(|&b| l1.iter().map(move |&a| (a, b))).collect();
    let rows: Vec<Vec<GridRow>> = cells
        .par_iter()
        .map(|&(lambda1, lambda2)| {
            let params = SensitivityParams { lambda1, lambda2, lambda1_0: spec.lambda1_0, lambda2_0: spec.lambda2_0 };
            let req = EffectRequest {
                params: &params,
                scales: &[spec.scale],
                estimands: &GRID_ESTIMANDS,
                check_bounds: true,
            };
            let point = effects(&analysis.bundle, &req);
            let summary = reps.as_ref().map(|r| summarize(&point, &r.bundles, &req, plan.seed, z).0);
            point.iter().map(|(key, value)| cell_row(lambda1, lambda2, key, value, summary.as_deref())).collect()
        })
        .collect();

    let mut counts = analysis.counts;
    if let Some(r) = &reps {
        counts += r.counts;
    }
    Ok(GridResult {
        rows: rows.into_iter().flatten().collect(),
        lambda1_values: l1,
        lambda2_values: l2,
        lambda_bounds: bounds,
        warnings,
        counts,
        bootstrap_failures: reps.map(|r| r.failures).unwrap_or_default(),
        alpha: spec.alpha,
    })
}

fn cell_row(
    lambda1: f64,
    lambda2: f64,
    key: &EffectKey,
    value: &crate::analysis::EffectValue,
    summary: Option<&[crate::inference::EffectEstimate]>,
) -> GridRow {
    let est = summary.and_then(|s| s.iter().find(|e| e.estimand == key.estimand));
    let (se, ci_low, ci_high, significant, n_dropped) = match est {
        Some(e) => (Some(e.se), Some(e.ci_low), Some(e.ci_high), e.significant(), e.n_dropped),
        None => (None, None, None, false, 0),
    };
    GridRow {
        lambda1,
        lambda2,
        estimand: key.estimand,
        scale: key.scale,
        method: key.method,
        point: value.as_ref().ok().copied(),
        se,
        ci_low,
        ci_high,
        significant,
        n_dropped,
        error: value.as_ref().err().map(|e| e.to_string()),
    }
}

impl GridResult {
    /// Tidy CSV: one row per cell and estimand, row-major in `(λ2, λ1)`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "lambda1",
            "lambda2",
            "estimand",
            "scale",
            "method",
            "point",
            "point_per_100k",
            "se",
            "ci_low",
            "ci_high",
            "significant",
            "n_dropped",
            "error",
        ])?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
        for r in &self.rows {
            let per = r.point.filter(|_| r.scale == Scale::Diff).map(|p| p * crate::PER_100K);
            wtr.write_record([
                r.lambda1.to_string(),
                r.lambda2.to_string(),
                r.estimand.to_string(),
                r.scale.to_string(),
                r.method.to_string(),
                opt(r.point),
                opt(per),
                opt(r.se),
                opt(r.ci_low),
                opt(r.ci_high),
                r.significant.to_string(),
                r.n_dropped.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-`λ2` summary of where an estimand becomes significant along `λ1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryRow {
    pub lambda2: f64,
    /// Smallest `λ1` whose cell is significant.
    pub first_significant: f64,
    /// `λ1` values at which the significance flag changes relative to the
    /// previous cell in the row.
    pub transitions: Vec<f64>,
}

/// Significance boundary of `estimand` over a rectangular grid. Rows with no
/// significant cell are omitted, so an all-insignificant grid yields an
/// empty boundary.
pub fn significance_partition(result: &GridResult, estimand: Estimand) -> Vec<BoundaryRow> {
    let mut out = Vec::new();
    for &l2 in &result.lambda2_values {
        let mut row: Vec<(f64, bool)> = result
            .rows
            .iter()
            .filter(|r| r.estimand == estimand && r.lambda2 == l2)
            .map(|r| (r.lambda1, r.significant))
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        let Some(&(first, _)) = row.iter().find(|(_, s)| *s) else { continue };
        let transitions = row.windows(2).filter(|w| w[0].1 != w[1].1).map(|w| w[1].0).collect();
        out.push(BoundaryRow { lambda2: l2, first_significant: first, transitions });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values_and_parsing() {
        assert_eq!("0:0.1:0.05".parse::<Axis>().unwrap().values(), vec![0.0, 0.05, 0.1]);
        assert_eq!("0.3".parse::<Axis>().unwrap(), Axis::Fixed(0.3));
        assert_eq!("0:0.2:0.1".parse::<Axis>().unwrap().values(), vec![0.0, 0.1, 0.2]);
        assert!("0:1".parse::<Axis>().is_err());
        assert!(Axis::Range { lo: 0.0, hi: 1.5, step: 0.1 }.validate("l").is_err());
        assert!(Axis::Range { lo: 0.0, hi: 0.5, step: 0.0 }.validate("l").is_err());
    }

    fn synthetic(flags: &[(f64, f64, bool)]) -> GridResult {
        let mut l1: Vec<f64> = flags.iter().map(|f| f.0).collect();
        let mut l2: Vec<f64> = flags.iter().map(|f| f.1).collect();
        l1.dedup();
        l1.sort_by(f64::total_cmp);
        l1.dedup();
        l2.sort_by(f64::total_cmp);
        l2.dedup();
        GridResult {
            rows: flags
                .iter()
                .map(|&(a, b, s)| GridRow {
                    lambda1: a,
                    lambda2: b,
                    estimand: Estimand::Theta,
                    scale: Scale::Diff,
                    method: MethodLabel::Dr,
                    point: Some(0.0),
                    se: Some(1.0),
                    ci_low: None,
                    ci_high: None,
                    significant: s,
                    n_dropped: 0,
                    error: None,
                })
                .collect(),
            lambda1_values: l1,
            lambda2_values: l2,
            lambda_bounds: None,
            warnings: vec![],
            counts: FitCounts::default(),
            bootstrap_failures: vec![],
            alpha: 0.05,
        }
    }

    #[test]
    fn partition_cases() {
        let all = synthetic(&[(0.0, 0.0, true), (0.1, 0.0, true)]);
        assert_eq!(significance_partition(&all, Estimand::Theta)[0].first_significant, 0.0);
        let none = synthetic(&[(0.0, 0.0, false), (0.1, 0.0, false)]);
        assert!(significance_partition(&none, Estimand::Theta).is_empty());
        let flip = synthetic(&[
            (0.0, 0.0, false),
            (0.02, 0.0, false),
            (0.04, 0.0, true),
            (0.06, 0.0, true),
            (0.0, 0.1, false),
            (0.02, 0.1, true),
            (0.04, 0.1, true),
            (0.06, 0.1, true),
        ]);
        let b = significance_partition(&flip, Estimand::Theta);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].first_significant, 0.04);
        assert_eq!(b[0].transitions, vec![0.04]);
        assert_eq!(b[1].first_significant, 0.02);
        assert!(significance_partition(&flip, Estimand::Sface1).is_empty());
    }
}
