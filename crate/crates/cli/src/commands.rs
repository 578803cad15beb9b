use std::path::Path;

use sface_core::analysis::{AnalysisOptions, EffectRequest, MethodSet};
use sface_core::data::{load_csv, CsvSchema, LoadReport, MissingnessModelSpec};
use sface_core::estimators::{MethodLabel, PropensityClip};
use sface_core::glm::FitOptions;
use sface_core::identification::{Estimand, Scale, SensitivityParams};
use sface_core::inference::{estimate as run_estimate, BootstrapPlan};
use sface_core::profiles::{
    compatible_profiles, feasible_profiles, profile_table, AssumptionCombo, Monotonicity, Observation,
};
use sface_core::sensitivity::{run_grid, significance_partition, Axis, GridSpec};
use sface_core::simulation::{run_sweep, write_metrics_csv, DGMParams, Study, StudySpec, Sweep};

use crate::args::{EstimateArgs, Format, InputArgs, ProfilesArgs, SchemaSource, SensitivityArgs, SimulateArgs};
use crate::report::*;
use crate::{emit, CliError};

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Data(format!("cannot write CSV: {e}"))
}

fn json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_vec_pretty(v).map_err(|e| CliError::Data(format!("cannot encode JSON: {e}")))?;
    s.push(b'\n');
    Ok(s)
}

/// `A`, `Y`, an optional `weight` column and every other column as a
/// covariate, in file order.
fn default_schema(path: &Path) -> Result<CsvSchema, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let has_weight = header.iter().any(|h| h == "weight");
    Ok(CsvSchema {
        exposure: "A".into(),
        outcome: "Y".into(),
        covariates: header.iter().filter(|h| !["A", "Y", "weight"].contains(h)).map(str::to_string).collect(),
        weight: has_weight.then(|| "weight".into()),
        case_covariates: vec![],
    })
}

fn schema(input: &InputArgs, data: &Path) -> Result<CsvSchema, CliError> {
    match &input.schema {
        None => default_schema(data),
        Some(SchemaSource::Inline(s)) => Ok(s.clone()),
        Some(SchemaSource::Path(p)) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| config(format!("cannot read schema {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| config(format!("schema {}: {e}", p.display())))
        }
    }
}

struct Loaded {
    report: LoadReport,
    schema: CsvSchema,
    path: String,
}

fn load(input: &InputArgs, methods: &MethodSet) -> Result<Loaded, CliError> {
    let path = input.data.as_deref().ok_or_else(|| config("no input data (--data)"))?;
    let schema = schema(input, path)?;
    let report = load_csv(path, &schema)?;
    if methods.needs_exposure_model() && report.dataset.dim() == 0 {
        return Err(config("IPTW and DR need covariates for the propensity model, but the schema lists none"));
    }
    Ok(Loaded { report, schema, path: path.display().to_string() })
}

fn analysis_options(input: &InputArgs) -> Result<AnalysisOptions, CliError> {
    let defaults = PropensityClip::default();
    let clip = PropensityClip { lo: input.clip_lo.unwrap_or(defaults.lo), hi: input.clip_hi.unwrap_or(defaults.hi) };
    if !(0.0 <= clip.lo && clip.lo < clip.hi && clip.hi <= 1.0) {
        return Err(config(format!(
            "propensity clipping bounds must satisfy 0 ≤ lo < hi ≤ 1, got {} and {}",
            clip.lo, clip.hi
        )));
    }
    let mut missingness = MissingnessModelSpec::default();
    if let Some(c) = &input.missingness_covariates {
        missingness.covariates = c.clone();
    }
    if let Some(q) = input.truncation_quantile {
        missingness.truncation_quantile = q;
    }
    Ok(AnalysisOptions {
        fit: FitOptions::default(),
        clip,
        augmentation: input.augmentation.unwrap_or_default(),
        missingness,
    })
}

fn plan(input: &InputArgs) -> BootstrapPlan {
    BootstrapPlan { n_reps: input.boot.unwrap_or(200), seed: input.seed.unwrap_or(1), refit_missingness: true }
}

fn warn(lines: &[String]) {
    for w in lines {
        eprintln!("sface: warning: {w}");
    }
}

pub fn estimate(a: EstimateArgs) -> Result<(), CliError> {
    let combo = a.combo.unwrap_or(AssumptionCombo::new(Monotonicity::SMono, Monotonicity::SMono));
    let methods = MethodSet::new(a.method.clone().unwrap_or_else(|| MethodLabel::ALL.to_vec()));
    let mut scales = a.scale.clone().unwrap_or_else(|| Scale::BOTH.to_vec());
    scales.sort();
    scales.dedup();
    let params = SensitivityParams {
        lambda1: a.lambda1.unwrap_or(0.0),
        lambda2: a.lambda2.unwrap_or(0.0),
        lambda1_0: a.lambda1_0.unwrap_or(0.0),
        lambda2_0: a.lambda2_0.unwrap_or(0.0),
    }
    .validate_against(combo)
    .map_err(|e| config(e.to_string()))?;
    let format = a.format.unwrap_or(Format::Json);
    if format == Format::Text {
        return Err(config("estimate writes json or csv"));
    }
    let opts = analysis_options(&a.input)?;
    let plan = plan(&a.input);
    let loaded = load(&a.input, &methods)?;
    let data = &loaded.report.dataset;

    let req = EffectRequest { params: &params, scales: &scales, estimands: &Estimand::ALL, check_bounds: true };
    let res = run_estimate(data, &methods, &opts, &plan, &req)?;
    let estimates: Vec<ReportedEstimate> = res.estimates.iter().map(ReportedEstimate::from).collect();
    let mut warnings = res.analysis.warnings.clone();
    if loaded.report.rejected_rows > 0 {
        warnings.push(format!("{} rows with missing values were dropped", loaded.report.rejected_rows));
    }
    for (f, name) in [
        (res.analysis.fits.outcome.as_ref().map(|f| f.converged), "outcome"),
        (res.analysis.fits.exposure.as_ref().map(|f| f.converged), "exposure"),
    ] {
        if f == Some(false) {
            warnings.push(format!("{name} model did not converge"));
        }
    }
    warn(&warnings);

    let bytes = match format {
        Format::Csv => estimates_csv(&estimates).map_err(csv_err)?,
        _ => {
            let report = EstimateReport {
                command: "estimate",
                settings: EstimateSettings {
                    data: loaded.path.clone(),
                    schema: loaded.schema.clone(),
                    combo,
                    methods: methods.iter().collect(),
                    scales: scales.clone(),
                    params,
                    boot: plan.n_reps,
                    seed: plan.seed,
                    augmentation: opts.augmentation,
                    clip: opts.clip,
                    missingness_covariates: opts.missingness.covariates.clone(),
                    truncation_quantile: opts.missingness.truncation_quantile,
                },
                data: DataSummary {
                    rows: data.len(),
                    rejected_rows: loaded.report.rejected_rows,
                    unknown_subtype: data.count_unknown_subtype(),
                    covariates: data.covariate_names().to_vec(),
                },
                missingness: &res.analysis.missingness,
                models: Models {
                    outcome: res.analysis.fits.outcome.as_ref(),
                    exposure: res.analysis.fits.exposure.as_ref(),
                    clipped_propensities: res.analysis.bundle.n_clipped,
                },
                estimates,
                undefined: res
                    .undefined
                    .iter()
                    .map(|(k, reason)| Undefined {
                        estimand: k.estimand,
                        scale: k.scale,
                        method: k.method,
                        reason: reason.clone(),
                    })
                    .collect(),
                bootstrap: BootstrapSummary {
                    replicates: plan.n_reps,
                    seed: plan.seed,
                    failed: res.failures.len(),
                    outcome_fits: res.counts.outcome,
                    exposure_fits: res.counts.exposure,
                    missingness_fits: res.counts.missingness,
                },
                warnings,
            };
            json(&report)?
        }
    };
    emit(a.input.out.as_deref(), &bytes)
}

pub fn sensitivity(a: SensitivityArgs) -> Result<(), CliError> {
    let combo = a.combo.unwrap_or(AssumptionCombo::new(Monotonicity::DMono, Monotonicity::DMono));
    let method = a.method.unwrap_or(MethodLabel::Dr);
    let axis = |v: Option<crate::args::AxisValue>| v.map_or(Axis::Fixed(0.0), |v| v.0);
    let mut spec = GridSpec::new(axis(a.lambda1), axis(a.lambda2), combo, a.scale.unwrap_or(Scale::Diff), method);
    spec.lambda1_0 = a.lambda1_0.unwrap_or(0.0);
    spec.lambda2_0 = a.lambda2_0.unwrap_or(0.0);
    spec.alpha = a.alpha.unwrap_or(0.05);
    spec.clip_to_bounds = a.clip_to_bounds.unwrap_or(false);
    spec.validate()?;
    let format = a.format.unwrap_or(Format::Csv);
    if format == Format::Text {
        return Err(config("sensitivity writes csv or json"));
    }
    let opts = analysis_options(&a.input)?;
    let plan = plan(&a.input);
    let loaded = load(&a.input, &MethodSet::new([method]))?;
    let result = run_grid(&loaded.report.dataset, &spec, &plan, &opts)?;
    warn(&result.warnings);

    let bytes = match format {
        Format::Json => json(&result)?,
        _ => {
            let mut buf = Vec::new();
            result.write_csv(&mut buf).map_err(csv_err)?;
            buf
        }
    };
    emit(a.input.out.as_deref(), &bytes)?;

    if let Some(path) = &a.boundary {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["estimand", "lambda2", "first_significant", "transitions"]).map_err(csv_err)?;
        for estimand in [Estimand::Sface1, Estimand::Sface2, Estimand::Theta] {
            for row in significance_partition(&result, estimand) {
                let t: Vec<String> = row.transitions.iter().map(f64::to_string).collect();
                w.write_record([
                    estimand.to_string(),
                    row.lambda2.to_string(),
                    row.first_significant.to_string(),
                    t.join(";"),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        emit(Some(path), &bytes)?;
    }
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let study = a.study.unwrap_or(Study::I);
    let mut spec = StudySpec::new(study);
    macro_rules! set {
        ($($src:ident => $dst:ident),*) => { $( if let Some(v) = a.$src.clone() { spec.$dst = v; } )* };
    }
    set!(n => n, sims => n_sims, boot => boot_reps, seed => seed, misspec => misspec, log_base => log_base, n_mc => n_mc);
    if let Some(aug) = a.augmentation {
        spec.analysis.augmentation = aug;
    }
    match (&a.sweep_path, &a.sweep_values) {
        (Some(path), Some(values)) => spec.sweep = Some(Sweep { path: path.clone(), values: values.clone() }),
        (None, None) => {}
        _ => return Err(config("--sweep-path and --sweep-values go together")),
    }
    let mut params = DGMParams::study_one();
    for p in a.param.iter().flatten() {
        params = params.with(&p.path, p.value).map_err(|e| config(e.to_string()))?;
    }
    spec.validate().map_err(|e| config(e.to_string()))?;
    let results = run_sweep(&spec, &params)?;
    for r in &results {
        if r.n_failed > 0 {
            eprintln!("sface: warning: {} of {} datasets failed; first: {}", r.n_failed, spec.n_sims, r.failures[0]);
        }
    }
    let mut buf = Vec::new();
    write_metrics_csv(&results, &mut buf).map_err(csv_err)?;
    emit(a.out.as_deref(), &buf)
}

pub fn profiles(a: ProfilesArgs) -> Result<(), CliError> {
    let combo = a.combo.ok_or_else(|| config("--combo is required"))?;
    let format = a.format.unwrap_or(Format::Text);
    if format == Format::Csv {
        return Err(config("profiles writes text or json"));
    }
    let bytes = match &a.observed {
        Some(o) => {
            let obs: Observation = o.parse().map_err(config)?;
            let ids = compatible_profiles(obs, combo).map_err(|e| config(e.to_string()))?;
            match format {
                Format::Json => json(&serde_json::json!({ "combo": combo, "observed": obs, "profiles": ids }))?,
                _ => {
                    let ids: Vec<String> = ids.iter().map(u8::to_string).collect();
                    format!("{{{}}}\n", ids.join(",")).into_bytes()
                }
            }
        }
        None => {
            let table = profile_table(combo);
            match format {
                Format::Json => json(&table)?,
                _ => {
                    let ids: Vec<String> = feasible_profiles(combo).iter().map(|p| p.id.to_string()).collect();
                    format!("feasible profiles: {{{}}}\n\n{}", ids.join(","), table.to_text()).into_bytes()
                }
            }
        }
    };
    emit(a.out.as_deref(), &bytes)
}
