//! The fit-then-estimate pipeline: missing-subtype weighting, nuisance model
//! fits, counterfactual marginals for each requested method, and the effects
//! derived from them.

use serde::{Deserialize, Serialize};

use crate::data::{missingness_weights, Dataset, MissingnessModelSpec, MissingnessSummary};
use crate::estimators::{
    conditional_from, dr_from, iptw_from, standardization_from, Augmentation, MethodLabel, Predictions, PropensityClip,
};
use crate::glm::{fit_exposure_model, fit_outcome_model, ExposureModelFit, FitOptions, OutcomeModelFit};
use crate::identification::{
    lambda_bounds, sface, te, theta, ComponentSet, Estimand, IdentificationError, Scale, SensitivityParams, Subtype,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub fit: FitOptions,
    pub clip: PropensityClip,
    pub augmentation: Augmentation,
    /// Used whenever the data contain units with unknown subtype.
    pub missingness: MissingnessModelSpec,
}

/// Requested estimation methods, kept sorted and unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MethodSet(Vec<MethodLabel>);

impl MethodSet {
    pub fn new(methods: impl IntoIterator<Item = MethodLabel>) -> Self {
        let mut v: Vec<MethodLabel> = methods.into_iter().collect();
        v.sort();
        v.dedup();
        MethodSet(v)
    }

    pub fn all() -> Self {
        MethodSet::new(MethodLabel::ALL)
    }

    pub fn contains(&self, m: MethodLabel) -> bool {
        self.0.contains(&m)
    }

    pub fn iter(&self) -> impl Iterator<Item = MethodLabel> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn needs_outcome_model(&self) -> bool {
        self.iter().any(MethodLabel::needs_outcome_model)
    }

    pub fn needs_exposure_model(&self) -> bool {
        self.iter().any(MethodLabel::needs_exposure_model)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NuisanceFits {
    pub outcome: Option<OutcomeModelFit>,
    pub exposure: Option<ExposureModelFit>,
}

/// Number of model fits performed, for checking what a driver recomputes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FitCounts {
    pub outcome: usize,
    pub exposure: usize,
    pub missingness: usize,
}

impl std::ops::AddAssign for FitCounts {
    fn add_assign(&mut self, o: FitCounts) {
        self.outcome += o.outcome;
        self.exposure += o.exposure;
        self.missingness += o.missingness;
    }
}

/// Conditional estimand for both subtypes on both scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalValues {
    pub diff: [Option<f64>; 2],
    pub rr: [Option<f64>; 2],
}

impl ConditionalValues {
    pub fn get(&self, k: Subtype, scale: Scale) -> Option<f64> {
        match scale {
            Scale::Diff => self.diff[k.index() - 1],
            Scale::Rr => self.rr[k.index() - 1],
        }
    }
}

/// Everything an effect needs from one dataset: the marginals for each
/// method and the conditional estimand. Sensitivity parameters act only on
/// this, so it is what bootstrap replicates cache.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentBundle {
    pub components: Vec<(MethodLabel, ComponentSet)>,
    pub conditional: Option<ConditionalValues>,
    pub n_clipped: usize,
}

impl ComponentBundle {
    pub fn get(&self, m: MethodLabel) -> Option<&ComponentSet> {
        self.components.iter().find(|(l, _)| *l == m).map(|(_, c)| c)
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub bundle: ComponentBundle,
    pub fits: NuisanceFits,
    pub missingness: MissingnessSummary,
    pub counts: FitCounts,
    /// Simplex warnings from [`ComponentSet::check`].
    pub warnings: Vec<String>,
}

/// Run the pipeline on `data`, which may still contain unknown subtypes.
/// `warm` supplies starting values for the model fits.
pub fn analyze(
    data: &Dataset,
    methods: &MethodSet,
    opts: &AnalysisOptions,
    warm: Option<&NuisanceFits>,
) -> crate::Result<Analysis> {
    if methods.is_empty() {
        return Err(crate::Error::Config("no estimation method requested".into()));
    }
    if data.count_unknown_subtype() == 0 {
        return analyze_weighted(data, methods, opts, warm);
    }
    let weighted = missingness_weights(data, &opts.missingness, &opts.fit)?;
    let mut counts = FitCounts { missingness: usize::from(weighted.summary.model.is_some()), ..Default::default() };
    let mut out = analyze_weighted(&weighted.dataset, methods, opts, warm)?;
    counts += out.counts;
    out.counts = counts;
    out.missingness = weighted.summary;
    Ok(out)
}

/// Pipeline on data that already carry their final weights (no unknown
/// subtypes).
pub fn analyze_weighted(
    data: &Dataset,
    methods: &MethodSet,
    opts: &AnalysisOptions,
    warm: Option<&NuisanceFits>,
) -> crate::Result<Analysis> {
    let mut counts = FitCounts::default();
    let outcome = if methods.needs_outcome_model() {
        counts.outcome += 1;
        Some(fit_outcome_model(data, &opts.fit, warm.and_then(|w| w.outcome.as_ref()))?)
    } else {
        None
    };
    let exposure = if methods.needs_exposure_model() {
        counts.exposure += 1;
        Some(fit_exposure_model(data, &opts.fit, warm.and_then(|w| w.exposure.as_ref()))?)
    } else {
        None
    };
    let pred = Predictions::new(data, outcome.as_ref(), exposure.as_ref(), opts.clip)?;

    let mut components = Vec::new();
    let mut warnings = Vec::new();
    for m in methods.iter() {
        let c = match m {
            MethodLabel::Standardization => standardization_from(pred.pi.as_ref().expect("outcome fit"), data),
            MethodLabel::Iptw => iptw_from(pred.e.as_ref().expect("exposure fit"), data),
            MethodLabel::Dr => dr_from(
                pred.pi.as_ref().expect("outcome fit"),
                pred.e.as_ref().expect("exposure fit"),
                data,
                opts.augmentation,
            ),
        };
        if let Some(w) = c.check()? {
            warnings.push(format!("{m}: {w}"));
        }
        components.push((m, c));
    }
    let conditional = pred.pi.as_ref().map(|pi| {
        let f = |k, s| conditional_from(pi, data, k, s).ok();
        ConditionalValues {
            diff: [f(Subtype::One, Scale::Diff), f(Subtype::Two, Scale::Diff)],
            rr: [f(Subtype::One, Scale::Rr), f(Subtype::Two, Scale::Rr)],
        }
    });
    let n_clipped = if exposure.is_some() { pred.n_clipped } else { 0 };
    Ok(Analysis {
        bundle: ComponentBundle { components, conditional, n_clipped },
        fits: NuisanceFits { outcome, exposure },
        missingness: MissingnessSummary::none(data),
        counts,
        warnings,
    })
}

/// Identifies an effect: estimand, scale and the method whose marginals it
/// uses (the conditional estimand always comes from the outcome model).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EffectKey {
    pub method: MethodLabel,
    pub scale: Scale,
    pub estimand: Estimand,
}

/// Effect value, or the reason it is undefined for this bundle.
pub type EffectValue = Result<f64, IdentificationError>;

/// When `check_bounds` is set, SF-ACE values are also rejected whenever λ
/// exceeds the data-driven bound of the bundle's marginals.
#[derive(Debug, Clone, Copy)]
pub struct EffectRequest<'a> {
    pub params: &'a SensitivityParams,
    pub scales: &'a [Scale],
    pub estimands: &'a [Estimand],
    pub check_bounds: bool,
}

/// All requested effects for every method in `bundle`, in a fixed order:
/// method, then scale, then estimand.
pub fn effects(bundle: &ComponentBundle, req: &EffectRequest<'_>) -> Vec<(EffectKey, EffectValue)> {
    let mut out = Vec::new();
    for &(method, c) in &bundle.components {
        let bound_error = if req.check_bounds { bound_violation(&c, req.params) } else { None };
        for &scale in req.scales {
            let s1 = sface(&c, req.params, Subtype::One, scale);
            let s2 = sface(&c, req.params, Subtype::Two, scale);
            for &estimand in req.estimands {
                let value = match estimand {
                    Estimand::Sface1 | Estimand::Sface2 | Estimand::Theta if bound_error.is_some() => {
                        Err(bound_error.clone().expect("checked"))
                    }
                    Estimand::Sface1 => s1.clone(),
                    Estimand::Sface2 => s2.clone(),
                    Estimand::Theta => match (&s1, &s2) {
                        (Ok(a), Ok(b)) => Ok(theta(*a, *b)),
                        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                    },
                    Estimand::TE1 => te(&c, Subtype::One, scale),
                    Estimand::TE2 => te(&c, Subtype::Two, scale),
                    Estimand::Conditional1 | Estimand::Conditional2 => {
                        if method != MethodLabel::Standardization {
                            continue;
                        }
                        let k = if estimand == Estimand::Conditional1 { Subtype::One } else { Subtype::Two };
                        match bundle.conditional.and_then(|cv| cv.get(k, scale)) {
                            Some(v) => Ok(v),
                            None => Err(IdentificationError::ZeroDenominator { what: "conditional estimand" }),
                        }
                    }
                };
                out.push((EffectKey { method, scale, estimand }, value));
            }
        }
    }
    out
}

fn bound_violation(c: &ComponentSet, p: &SensitivityParams) -> Option<IdentificationError> {
    if p.lambda1 == 0.0 && p.lambda2 == 0.0 {
        return None;
    }
    let (b1, b2) = match lambda_bounds(c) {
        Ok(b) => b,
        Err(e) => return Some(e),
    };
    if p.lambda1 > b1 {
        Some(IdentificationError::AboveBound { name: "lambda1", value: p.lambda1, bound: b1 })
    } else if p.lambda2 > b2 {
        Some(IdentificationError::AboveBound { name: "lambda2", value: p.lambda2, bound: b2 })
    } else {
        None
    }
}
