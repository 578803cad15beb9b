//! Serializable output records.

use serde::Serialize;
use sface_core::data::{CsvSchema, MissingnessSummary};
use sface_core::estimators::{Augmentation, MethodLabel, PropensityClip};
use sface_core::glm::{ExposureModelFit, OutcomeModelFit};
use sface_core::identification::{Estimand, Scale, SensitivityParams};
use sface_core::inference::EffectEstimate;
use sface_core::profiles::AssumptionCombo;
use sface_core::PER_100K;

#[derive(Debug, Serialize)]
pub struct EstimateSettings {
    pub data: String,
    pub schema: CsvSchema,
    pub combo: AssumptionCombo,
    pub methods: Vec<MethodLabel>,
    pub scales: Vec<Scale>,
    pub params: SensitivityParams,
    pub boot: usize,
    pub seed: u64,
    pub augmentation: Augmentation,
    pub clip: PropensityClip,
    pub missingness_covariates: Vec<String>,
    pub truncation_quantile: f64,
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub rows: usize,
    pub rejected_rows: usize,
    pub unknown_subtype: usize,
    pub covariates: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Models<'a> {
    pub outcome: Option<&'a OutcomeModelFit>,
    pub exposure: Option<&'a ExposureModelFit>,
    pub clipped_propensities: usize,
}

#[derive(Debug, Serialize)]
pub struct Per100k {
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Serialize)]
pub struct ReportedEstimate {
    pub estimand: Estimand,
    pub scale: Scale,
    pub method: MethodLabel,
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Difference scale only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_100k: Option<Per100k>,
    pub n_boot: usize,
    pub n_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

impl From<&EffectEstimate> for ReportedEstimate {
    fn from(e: &EffectEstimate) -> Self {
        let per_100k = (e.scale == Scale::Diff).then_some(Per100k {
            point: e.point * PER_100K,
            se: e.se * PER_100K,
            ci_low: e.ci_low * PER_100K,
            ci_high: e.ci_high * PER_100K,
        });
        ReportedEstimate {
            estimand: e.estimand,
            scale: e.scale,
            method: e.method,
            point: e.point,
            se: e.se,
            ci_low: e.ci_low,
            ci_high: e.ci_high,
            per_100k,
            n_boot: e.n_boot,
            n_dropped: e.n_dropped,
            p_value: e.p_value,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Undefined {
    pub estimand: Estimand,
    pub scale: Scale,
    pub method: MethodLabel,
    pub reason: String,
}

#[derive(Debug, Serialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub seed: u64,
    pub failed: usize,
    pub outcome_fits: usize,
    pub exposure_fits: usize,
    pub missingness_fits: usize,
}

#[derive(Debug, Serialize)]
pub struct EstimateReport<'a> {
    pub command: &'static str,
    pub settings: EstimateSettings,
    pub data: DataSummary,
    pub missingness: &'a MissingnessSummary,
    pub models: Models<'a>,
    pub estimates: Vec<ReportedEstimate>,
    pub undefined: Vec<Undefined>,
    pub bootstrap: BootstrapSummary,
    pub warnings: Vec<String>,
}

/// Estimates as CSV, difference-scale columns also per 100,000.
pub fn estimates_csv(estimates: &[ReportedEstimate]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "estimand",
        "scale",
        "method",
        "point",
        "se",
        "ci_low",
        "ci_high",
        "point_per_100k",
        "se_per_100k",
        "ci_low_per_100k",
        "ci_high_per_100k",
        "n_boot",
        "n_dropped",
        "p_value",
    ])?;
    let na = || "NA".to_string();
    for e in estimates {
        let per = |f: fn(&Per100k) -> f64| e.per_100k.as_ref().map_or_else(na, |p| f(p).to_string());
        w.write_record([
            e.estimand.to_string(),
            e.scale.to_string(),
            e.method.to_string(),
            e.point.to_string(),
            e.se.to_string(),
            e.ci_low.to_string(),
            e.ci_high.to_string(),
            per(|p| p.point),
            per(|p| p.se),
            per(|p| p.ci_low),
            per(|p| p.ci_high),
            e.n_boot.to_string(),
            e.n_dropped.to_string(),
            e.p_value.map_or_else(na, |p| p.to_string()),
        ])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}
