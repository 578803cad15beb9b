//! Nonparametric bootstrap, Wald intervals and the heterogeneity test.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    analyze, analyze_weighted, effects, Analysis, AnalysisOptions, ComponentBundle, EffectKey, EffectRequest,
    EffectValue, FitCounts, MethodSet, NuisanceFits,
};
use crate::data::{missingness_weights, Dataset};
use crate::estimators::MethodLabel;
use crate::identification::{Estimand, Scale};
use crate::rng::{stream, tag};
use crate::stats::{normal_cdf, sample_sd, Z_975};

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
    #[error("bootstrap needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("{failed} of {total} bootstrap replicates failed (limit 10%); first failure: {first}")]
    TooManyFailures { failed: usize, total: usize, first: String },
    #[error("standard error must be positive, got {0}")]
    NonPositiveSe(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapPlan {
    pub n_reps: usize,
    pub seed: u64,
    /// Refit the missing-subtype model inside each replicate.
    pub refit_missingness: bool,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        BootstrapPlan { n_reps: 200, seed: 1, refit_missingness: true }
    }
}

impl BootstrapPlan {
    pub fn new(n_reps: usize, seed: u64) -> Self {
        BootstrapPlan { n_reps, seed, ..Default::default() }
    }
}

/// Row indices of bootstrap replicate `rep`: `n` draws with replacement.
pub fn resample_indices(n: usize, seed: u64, rep: usize) -> Vec<usize> {
    let mut rng = stream(seed, &[tag::BOOTSTRAP, rep as u64]);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateFailure {
    pub index: usize,
    pub message: String,
}

/// Per-replicate results in replicate order; `None` marks a failure.
#[derive(Debug, Clone)]
pub struct Replicates<T> {
    pub values: Vec<Option<T>>,
    pub failures: Vec<ReplicateFailure>,
}

/// Run `f` on `plan.n_reps` resamples of `data` in parallel. The result does
/// not depend on the number of worker threads.
pub fn bootstrap_replicates<T, F>(data: &Dataset, plan: &BootstrapPlan, f: F) -> Result<Replicates<T>, InferenceError>
where
    T: Send,
    F: Fn(&Dataset) -> crate::Result<T> + Sync,
{
    if plan.n_reps < 2 {
        return Err(InferenceError::TooFewReplicates(plan.n_reps));
    }
    if data.len() < 2 {
        return Err(InferenceError::TooFewRows(data.len()));
    }
    let results: Vec<Result<T, String>> = (0..plan.n_reps)
        .into_par_iter()
        .map(|r| {
            let idx = resample_indices(data.len(), plan.seed, r);
            f(&data.resample(&idx)).map_err(|e| e.to_string())
        })
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => values.push(Some(v)),
            Err(message) => {
                failures.push(ReplicateFailure { index, message });
                values.push(None);
            }
        }
    }
    if failures.len() as f64 > MAX_FAILURE_SHARE * plan.n_reps as f64 {
        return Err(InferenceError::TooManyFailures {
            failed: failures.len(),
            total: plan.n_reps,
            first: failures[0].message.clone(),
        });
    }
    Ok(Replicates { values, failures })
}

/// Replicate component bundles for the full pipeline.
#[derive(Debug, Clone)]
pub struct BundleReplicates {
    pub bundles: Vec<Option<ComponentBundle>>,
    pub failures: Vec<ReplicateFailure>,
    pub counts: FitCounts,
}

/// Bootstrap the pipeline. Rows are resampled from `data` before any
/// missing-subtype weighting when `plan.refit_missingness` is set, and from
/// the weighted data otherwise. `warm` seeds each replicate's model fits.
pub fn bootstrap_bundles(
    data: &Dataset,
    methods: &MethodSet,
    opts: &AnalysisOptions,
    plan: &BootstrapPlan,
    warm: Option<&NuisanceFits>,
) -> crate::Result<BundleReplicates> {
    let run = |d: &Dataset, weighted: bool| -> crate::Result<Analysis> {
        if weighted {
            analyze_weighted(d, methods, opts, warm)
        } else {
            analyze(d, methods, opts, warm)
        }
    };
    let reps = if plan.refit_missingness || data.count_unknown_subtype() == 0 {
        bootstrap_replicates(data, plan, |d| run(d, false))?
    } else {
        let w = missingness_weights(data, &opts.missingness, &opts.fit)?;
        bootstrap_replicates(&w.dataset, plan, |d| run(d, true))?
    };
    let mut counts = FitCounts::default();
    let bundles = reps
        .values
        .into_iter()
        .map(|a| {
            a.map(|a| {
                counts += a.counts;
                a.bundle
            })
        })
        .collect();
    Ok(BundleReplicates { bundles, failures: reps.failures, counts })
}

/// Point estimate with bootstrap standard error and Wald interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub estimand: Estimand,
    pub scale: Scale,
    pub method: MethodLabel,
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Replicates contributing to `se`.
    pub n_boot: usize,
    /// Successful replicates in which this effect was undefined.
    pub n_dropped: usize,
    pub seed: u64,
    /// Two-sided test of a zero contrast; `θ` on the difference scale only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
}

/// `point ± z·se`.
pub fn wald_ci(point: f64, se: f64, z: f64) -> (f64, f64) {
    (point - z * se, point + z * se)
}

/// Two-sided normal p-value `2(1 − Φ(|θ/se|))`.
pub fn theta_test(theta_hat: f64, se: f64) -> Result<f64, InferenceError> {
    if se.is_nan() || se <= 0.0 {
        return Err(InferenceError::NonPositiveSe(se));
    }
    Ok(2.0 * (1.0 - normal_cdf((theta_hat / se).abs())))
}

impl EffectEstimate {
    /// Summary from the original-data point estimate and replicate values.
    pub fn from_replicates(
        key: EffectKey,
        point: f64,
        replicates: &[f64],
        n_dropped: usize,
        seed: u64,
        z: f64,
    ) -> Self {
        let se = sample_sd(replicates);
        let (ci_low, ci_high) = wald_ci(point, se, z);
        let p_value =
            (key.estimand == Estimand::Theta && key.scale == Scale::Diff).then(|| theta_test(point, se).ok()).flatten();
        EffectEstimate {
            estimand: key.estimand,
            scale: key.scale,
            method: key.method,
            point,
            se,
            ci_low,
            ci_high,
            n_boot: replicates.len(),
            n_dropped,
            seed,
            p_value,
        }
    }

    /// Whether the interval excludes the null value of the scale.
    pub fn significant(&self) -> bool {
        self.ci_low > self.scale.null() || self.ci_high < self.scale.null()
    }
}

/// Replicate values for each effect key, aligned with the replicate index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTable {
    pub keys: Vec<EffectKey>,
    /// `values[j][r]` for key `j`, replicate `r`.
    pub values: Vec<Vec<Option<f64>>>,
}

impl ReplicateTable {
    /// CSV with one row per replicate and one column per effect.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["replicate".to_string()];
        header.extend(self.keys.iter().map(|k| format!("{}_{}_{}", k.estimand, k.scale, k.method)));
        wtr.write_record(&header)?;
        let n = self.values.first().map_or(0, Vec::len);
        for r in 0..n {
            let mut rec = vec![r.to_string()];
            rec.extend(self.values.iter().map(|col| col[r].map_or_else(|| "NA".to_string(), |v| v.to_string())));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Combine point effects with effects recomputed on each replicate bundle.
/// Effects undefined on the original data are omitted.
pub fn summarize(
    point: &[(EffectKey, EffectValue)],
    replicates: &[Option<ComponentBundle>],
    req: &EffectRequest<'_>,
    seed: u64,
    z: f64,
) -> (Vec<EffectEstimate>, ReplicateTable) {
    let rep_effects: Vec<Option<Vec<(EffectKey, EffectValue)>>> =
        replicates.iter().map(|b| b.as_ref().map(|b| effects(b, req))).collect();
    let mut estimates = Vec::new();
    let mut table = ReplicateTable { keys: Vec::new(), values: Vec::new() };
    for (j, (key, value)) in point.iter().enumerate() {
        let Ok(p) = value else { continue };
        let column: Vec<Option<f64>> = rep_effects
            .iter()
            .map(|r| {
                r.as_ref().and_then(|e| {
                    debug_assert_eq!(e[j].0, *key);
                    e[j].1.as_ref().ok().copied().filter(|v| v.is_finite())
                })
            })
            .collect();
        let used: Vec<f64> = column.iter().flatten().copied().collect();
        let succeeded = rep_effects.iter().filter(|r| r.is_some()).count();
        estimates.push(EffectEstimate::from_replicates(*key, *p, &used, succeeded - used.len(), seed, z));
        table.keys.push(*key);
        table.values.push(column);
    }
    (estimates, table)
}

/// Point estimates with bootstrap inference for one dataset.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub analysis: Analysis,
    pub estimates: Vec<EffectEstimate>,
    pub replicates: ReplicateTable,
    pub failures: Vec<ReplicateFailure>,
    pub counts: FitCounts,
    /// Effects undefined on the original data, with the reason.
    pub undefined: Vec<(EffectKey, String)>,
}

pub fn estimate(
    data: &Dataset,
    methods: &MethodSet,
    opts: &AnalysisOptions,
    plan: &BootstrapPlan,
    req: &EffectRequest<'_>,
) -> crate::Result<EstimationResult> {
    let analysis = analyze(data, methods, opts, None)?;
    let reps = bootstrap_bundles(data, methods, opts, plan, Some(&analysis.fits))?;
    let point = effects(&analysis.bundle, req);
    let (estimates, replicates) = summarize(&point, &reps.bundles, req, plan.seed, Z_975);
    let undefined = point.iter().filter_map(|(k, v)| v.as_ref().err().map(|e| (*k, e.to_string()))).collect();
    let mut counts = analysis.counts;
    counts += reps.counts;
    Ok(EstimationResult { analysis, estimates, replicates, failures: reps.failures, counts, undefined })
}
