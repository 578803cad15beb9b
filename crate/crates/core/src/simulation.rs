//! Synthetic cohorts with known potential outcomes and the Monte-Carlo study
//! harness built on them.
//!
//! Covariates are `X1 ~ Bernoulli(0.5)`, `X2 ~ N(0, 1)` and an unmeasured
//! `U ~ N(0, 1)`. `Y(0)` follows the multinomial model at `a = 0`. Anyone
//! diseased without exposure keeps the same subtype under exposure; for the
//! others `Y(1)` is drawn from the conditional law that makes the marginal of
//! `Y(1)` equal the multinomial model at `a = 1`. Both subtypes therefore
//! satisfy S-monotonicity by construction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{analyze, effects, AnalysisOptions, EffectKey, EffectRequest, MethodSet};
use crate::data::{Dataset, Outcome};
use crate::estimators::MethodLabel;
use crate::identification::{Estimand, Scale, Subtype};
use crate::inference::{bootstrap_bundles, summarize, BootstrapPlan, EffectEstimate};
use crate::rng::{derive_key, stream, tag};
use crate::stats::{mean, sample_sd, Z_975};
use crate::PER_100K;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulationError {
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(
        "infeasible parameters: P[Y(1)={k}] < P[Y(0)={k}] at x1={x1}, x2={x2}, u={u} \
         (adjusted probability {adjusted:.3e})"
    )]
    Infeasible { k: usize, x1: f64, x2: f64, u: f64, adjusted: f64 },
    #[error("all {0} simulated datasets failed to analyse; first error: {1}")]
    AllFailed(usize, String),
}

/// Parameters of the data-generating mechanism. Vectors are ordered
/// `(X1, X2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DGMParams {
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub gamma1: [f64; 2],
    pub gamma2: [f64; 2],
    pub delta: [f64; 2],
    pub phi: f64,
    pub psi: [f64; 2],
}

impl Default for DGMParams {
    fn default() -> Self {
        DGMParams::study_one()
    }
}

impl DGMParams {
    /// The baseline parameter set shared by all three studies.
    pub fn study_one() -> Self {
        let l = f64::ln;
        DGMParams {
            alpha: [l(0.05), l(0.005)],
            beta: [l(2.0), l(2.0)],
            gamma1: [l(0.25), l(2.0)],
            gamma2: [l(2.0), l(2.0)],
            delta: [l(2.0), l(2.0)],
            phi: l(0.7),
            psi: [l(2.0), l(2.0)],
        }
    }

    fn slot(&mut self, path: &str) -> Option<&mut f64> {
        Some(match path {
            "alpha1" => &mut self.alpha[0],
            "alpha2" => &mut self.alpha[1],
            "beta1" => &mut self.beta[0],
            "beta2" => &mut self.beta[1],
            "gamma1.1" => &mut self.gamma1[0],
            "gamma1.2" => &mut self.gamma1[1],
            "gamma2.1" => &mut self.gamma2[0],
            "gamma2.2" => &mut self.gamma2[1],
            "delta1" => &mut self.delta[0],
            "delta2" => &mut self.delta[1],
            "phi" => &mut self.phi,
            "psi1" => &mut self.psi[0],
            "psi2" => &mut self.psi[1],
            _ => return None,
        })
    }

    /// Copy with the parameter at `path` (e.g. `gamma2.2`, `delta2`) set.
    pub fn with(mut self, path: &str, value: f64) -> Result<Self, SimulationError> {
        *self.slot(path).ok_or_else(|| SimulationError::Config(format!("unknown parameter path `{path}`")))? = value;
        Ok(self)
    }
}

/// Which generating models use the transformed `X2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Misspec {
    #[default]
    None,
    Exposure,
    Outcome,
    Both,
}

impl Misspec {
    pub const ALL: [Misspec; 4] = [Misspec::None, Misspec::Exposure, Misspec::Outcome, Misspec::Both];

    fn outcome(self) -> bool {
        matches!(self, Misspec::Outcome | Misspec::Both)
    }

    fn exposure(self) -> bool {
        matches!(self, Misspec::Exposure | Misspec::Both)
    }
}

impl FromStr for Misspec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Misspec::None),
            "exposure" | "a" => Ok(Misspec::Exposure),
            "outcome" | "y" => Ok(Misspec::Outcome),
            "both" => Ok(Misspec::Both),
            other => Err(format!("unknown misspecification `{other}` (expected none, exposure, outcome or both)")),
        }
    }
}

impl fmt::Display for Misspec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Misspec::None => "none",
            Misspec::Exposure => "exposure",
            Misspec::Outcome => "outcome",
            Misspec::Both => "both",
        })
    }
}

/// Parameters plus the misspecification used when generating data. Under
/// misspecification `X2` is replaced by `log_b |X2|` in the chosen models;
/// the analysis models always use the raw `X2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: DGMParams,
    pub misspec: Misspec,
    pub log_base: f64,
}

pub const DEFAULT_LOG_BASE: f64 = 2.0;

impl Scenario {
    pub fn new(params: DGMParams) -> Self {
        Scenario { params, misspec: Misspec::None, log_base: DEFAULT_LOG_BASE }
    }

    pub fn with_misspec(mut self, misspec: Misspec) -> Self {
        self.misspec = misspec;
        self
    }

    fn transform(&self, x2: f64) -> f64 {
        x2.abs().ln() / self.log_base.ln()
    }

    /// `P[Y(a) = ·| X, U]`.
    pub fn outcome_probs(&self, a: u8, x1: f64, x2: f64, u: f64) -> [f64; 3] {
        let p = &self.params;
        let x2 = if self.misspec.outcome() { self.transform(x2) } else { x2 };
        let a = f64::from(a);
        let e1 = p.alpha[0] + p.beta[0] * a + p.gamma1[0] * x1 + p.gamma1[1] * x2 + p.delta[0] * u;
        let e2 = p.alpha[1] + p.beta[1] * a + p.gamma2[0] * x1 + p.gamma2[1] * x2 + p.delta[1] * u;
        crate::glm::multinomial::softmax3(e1, e2)
    }

    pub fn propensity(&self, x1: f64, x2: f64) -> f64 {
        let p = &self.params;
        let x2 = if self.misspec.exposure() { self.transform(x2) } else { x2 };
        crate::glm::sigmoid(p.phi + p.psi[0] * x1 + p.psi[1] * x2)
    }

    /// Draw `(Y(0), Y(1))` at fixed covariates and latent `u`.
    pub fn draw_potential_outcomes<R: Rng>(
        &self,
        x1: f64,
        x2: f64,
        u: f64,
        rng: &mut R,
    ) -> Result<(u8, u8), SimulationError> {
        let p0 = self.outcome_probs(0, x1, x2, u);
        let p1 = self.outcome_probs(1, x1, x2, u);
        let y0 = categorical(rng.random::<f64>(), p0[1], p0[2]);
        let v: f64 = rng.random();
        if y0 > 0 {
            return Ok((y0, y0));
        }
        let mut q = [0.0; 3];
        for k in 1..3 {
            let adjusted = (p1[k] - p0[k]) / p0[0];
            if adjusted < -1e-12 {
                return Err(SimulationError::Infeasible { k, x1, x2, u, adjusted });
            }
            q[k] = adjusted.max(0.0);
        }
        Ok((y0, categorical(v, q[1], q[2])))
    }

    /// Draw one unit: `(x1, x2, u, Y(0), Y(1), A)`.
    fn draw<R: Rng>(&self, rng: &mut R) -> Result<DrawnUnit, SimulationError> {
        let x1 = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let x2: f64 = rng.sample(StandardNormal);
        let u: f64 = rng.sample(StandardNormal);
        let (y0, y1) = self.draw_potential_outcomes(x1, x2, u, rng)?;
        let a = u8::from(rng.random::<f64>() < self.propensity(x1, x2));
        Ok(DrawnUnit { x1, x2, u, y0, y1, a })
    }
}

struct DrawnUnit {
    x1: f64,
    x2: f64,
    u: f64,
    y0: u8,
    y1: u8,
    a: u8,
}

#[inline]
fn categorical(v: f64, p1: f64, p2: f64) -> u8 {
    if v < p1 {
        1
    } else if v < p1 + p2 {
        2
    } else {
        0
    }
}

fn outcome_of(code: u8) -> Outcome {
    match code {
        1 => Outcome::Subtype1,
        2 => Outcome::Subtype2,
        _ => Outcome::DiseaseFree,
    }
}

/// Units per random stream; chunks are generated in parallel.
const CHUNK: usize = 8192;

/// A simulated cohort: the observed data plus the potential outcomes and the
/// latent covariate that generated them.
#[derive(Debug, Clone)]
pub struct Population {
    pub data: Dataset,
    pub y0: Vec<Outcome>,
    pub y1: Vec<Outcome>,
    pub u: Vec<f64>,
}

impl Population {
    /// Units with a subtype under no exposure but a different outcome under
    /// exposure, i.e. S-monotonicity violations (always empty here).
    pub fn smono_violations(&self) -> Vec<usize> {
        (0..self.y0.len()).filter(|&i| self.y0[i].is_diseased() && self.y0[i] != self.y1[i]).collect()
    }
}

pub fn simulate_population(params: &DGMParams, n: usize, seed: u64) -> Result<Population, SimulationError> {
    Scenario::new(*params).simulate(n, seed)
}

impl Scenario {
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Population, SimulationError> {
        let chunks: Vec<Vec<DrawnUnit>> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(seed, &[tag::POPULATION, c as u64]);
                let len = CHUNK.min(n - c * CHUNK);
                (0..len).map(|_| self.draw(&mut rng)).collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let mut data = Dataset::with_capacity(vec!["x1".into(), "x2".into()], vec![], n);
        let mut y0 = Vec::with_capacity(n);
        let mut y1 = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        for d in chunks.into_iter().flatten() {
            let observed = if d.a == 1 { d.y1 } else { d.y0 };
            data.push_row(d.a, &[d.x1, d.x2], &[], outcome_of(observed), 1.0);
            y0.push(outcome_of(d.y0));
            y1.push(outcome_of(d.y1));
            u.push(d.u);
        }
        Ok(Population { data, y0, y1, u })
    }

    /// Joint counts of `(Y(0), Y(1))` over `n_mc` simulated units, without
    /// storing the population.
    pub fn joint_counts(&self, n_mc: usize, seed: u64) -> Result<[[u64; 3]; 3], SimulationError> {
        let per_chunk: Vec<[[u64; 3]; 3]> = (0..n_mc.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(seed, &[tag::TRUTH, c as u64]);
                let len = CHUNK.min(n_mc - c * CHUNK);
                let mut t = [[0u64; 3]; 3];
                for _ in 0..len {
                    let d = self.draw(&mut rng)?;
                    t[d.y0 as usize][d.y1 as usize] += 1;
                }
                Ok(t)
            })
            .collect::<Result<_, SimulationError>>()?;
        let mut total = [[0u64; 3]; 3];
        for t in per_chunk {
            for i in 0..3 {
                for j in 0..3 {
                    total[i][j] += t[i][j];
                }
            }
        }
        Ok(total)
    }
}

/// Effects computed by definition from potential outcomes, with
/// Monte-Carlo standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrueEffects {
    /// Indexed by subtype − 1.
    pub sface_diff: [f64; 2],
    pub sface_rr: [f64; 2],
    pub te_diff: [f64; 2],
    pub te_rr: [f64; 2],
    pub sface_diff_se: [f64; 2],
    pub sface_rr_se: [f64; 2],
    pub n_mc: usize,
}

impl TrueEffects {
    /// Effects from a joint table `counts[y0][y1]` of potential outcomes.
    pub fn from_counts(counts: &[[u64; 3]; 3]) -> Self {
        let n: u64 = counts.iter().flatten().sum();
        let c = |i: usize, j: usize| counts[i][j] as f64;
        let mut out = TrueEffects {
            sface_diff: [0.0; 2],
            sface_rr: [0.0; 2],
            te_diff: [0.0; 2],
            te_rr: [0.0; 2],
            sface_diff_se: [0.0; 2],
            sface_rr_se: [0.0; 2],
            n_mc: n as usize,
        };
        for k in 1..3 {
            let o = 3 - k;
            // Stratum free of the other subtype under both exposures:
            // neither Y(0) nor Y(1) equals `o`.
            let s: Vec<(usize, usize)> =
                (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| i != o && j != o).collect();
            let size: f64 = s.iter().map(|&(i, j)| c(i, j)).sum();
            let a: f64 = s.iter().filter(|&&(_, j)| j == k).map(|&(i, j)| c(i, j)).sum::<f64>() / size;
            let b: f64 = s.iter().filter(|&&(i, _)| i == k).map(|&(i, j)| c(i, j)).sum::<f64>() / size;
            // d = Y^k(1) − Y^k(0) ∈ {−1, 0, 1}
            let d2: f64 = s.iter().filter(|&&(i, j)| (i == k) != (j == k)).map(|&(i, j)| c(i, j)).sum::<f64>() / size;
            let ab: f64 = s.iter().filter(|&&(i, j)| i == k && j == k).map(|&(i, j)| c(i, j)).sum::<f64>() / size;
            let diff = a - b;
            let rr = a / b;
            let var_d = (d2 - diff * diff) / size;
            // Delta method for a ratio of paired means.
            let (va, vb, cov) = (a * (1.0 - a), b * (1.0 - b), ab - a * b);
            let var_rr = (va - 2.0 * rr * cov + rr * rr * vb) / (b * b * size);
            let p1: f64 = (0..3).map(|i| c(i, k)).sum::<f64>() / n as f64;
            let p0: f64 = (0..3).map(|j| c(k, j)).sum::<f64>() / n as f64;
            out.sface_diff[k - 1] = diff;
            out.sface_rr[k - 1] = rr;
            out.sface_diff_se[k - 1] = var_d.sqrt();
            out.sface_rr_se[k - 1] = var_rr.sqrt();
            out.te_diff[k - 1] = p1 - p0;
            out.te_rr[k - 1] = p1 / p0;
        }
        out
    }

    pub fn sface(&self, k: Subtype, scale: Scale) -> f64 {
        match scale {
            Scale::Diff => self.sface_diff[k.index() - 1],
            Scale::Rr => self.sface_rr[k.index() - 1],
        }
    }
}

/// Ground truth for a scenario by Monte Carlo over `n_mc` units.
pub fn true_effects(scenario: &Scenario, n_mc: usize, seed: u64) -> Result<TrueEffects, SimulationError> {
    if n_mc == 0 {
        return Err(SimulationError::Config("n_mc must be positive".into()));
    }
    Ok(TrueEffects::from_counts(&scenario.joint_counts(n_mc, seed)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Study {
    I,
    II,
    III,
}

impl FromStr for Study {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Study::I),
            "II" | "2" => Ok(Study::II),
            "III" | "3" => Ok(Study::III),
            other => Err(format!("unknown study `{other}` (expected I, II or III)")),
        }
    }
}

/// A named parameter and the values it takes across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub path: String,
    pub values: Vec<f64>,
}

impl Sweep {
    /// The Study II column: the `X2` coefficient of subtype 2 from log 2 to
    /// log 6.
    pub fn study_two() -> Self {
        Sweep { path: "gamma2.2".into(), values: (2..=6).map(|k| (k as f64).ln()).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub study: Study,
    pub n: usize,
    pub n_sims: usize,
    /// 0 skips the bootstrap (no SE or coverage).
    pub boot_reps: usize,
    pub seed: u64,
    pub sweep: Option<Sweep>,
    pub misspec: Misspec,
    pub log_base: f64,
    /// Monte-Carlo size for the ground truth.
    pub n_mc: usize,
    pub analysis: AnalysisOptions,
}

impl StudySpec {
    pub fn new(study: Study) -> Self {
        StudySpec {
            study,
            n: 10_000,
            n_sims: 500,
            boot_reps: 200,
            seed: 1,
            sweep: (study == Study::II).then(Sweep::study_two),
            misspec: Misspec::None,
            log_base: DEFAULT_LOG_BASE,
            n_mc: 10_000_000,
            analysis: AnalysisOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let bad = |m: String| Err(SimulationError::Config(m));
        if self.misspec != Misspec::None && self.study != Study::III {
            return bad("misspecification is only used in Study III".into());
        }
        if self.n < 10 {
            return bad(format!("n must be at least 10, got {}", self.n));
        }
        if self.n_sims == 0 {
            return bad("n_sims must be positive".into());
        }
        if self.boot_reps == 1 {
            return bad("boot_reps must be 0 or at least 2".into());
        }
        if self.n_mc == 0 {
            return bad("n_mc must be positive".into());
        }
        if !(self.log_base > 0.0 && self.log_base != 1.0) {
            return bad(format!("log_base must be positive and not 1, got {}", self.log_base));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep has no values".into());
            }
            DGMParams::study_one().with(&s.path, 0.0)?;
        }
        Ok(())
    }
}

/// One row of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    /// Reference for every row, including TE and the conditional estimand.
    pub truth: f64,
    pub subtype: Subtype,
    /// `SFACE`, `TE` or `Conditional`.
    pub estimand: &'static str,
    pub method: MethodLabel,
    pub scale: Scale,
    pub mean_estimate: f64,
    pub bias: f64,
    pub pct_bias: f64,
    /// `None` without bootstrap.
    pub cp95: Option<f64>,
    pub emp_sd: f64,
    pub mean_est_se: Option<f64>,
    /// Simulations contributing to the row.
    pub n_ok: usize,
}

/// Per-simulation values feeding one metrics row, in simulation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowDraws {
    pub estimates: Vec<f64>,
    /// Empty without bootstrap.
    pub ses: Vec<f64>,
    pub intervals: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyResult {
    pub sweep_value: Option<f64>,
    pub truth: TrueEffects,
    pub rows: Vec<MetricsRow>,
    pub n_failed: usize,
    pub failures: Vec<String>,
    /// Aligned with `rows`.
    #[serde(skip)]
    pub draws: Vec<RowDraws>,
}

/// The table rows: five estimators for each subtype and scale.
fn row_layout() -> Vec<(Subtype, &'static str, MethodLabel, Scale, EffectKey)> {
    let mut out = Vec::new();
    for scale in Scale::BOTH {
        for k in Subtype::BOTH {
            for method in MethodLabel::ALL {
                out.push((k, "SFACE", method, scale, EffectKey { method, scale, estimand: Estimand::sface(k) }));
            }
            let m = MethodLabel::Standardization;
            out.push((k, "TE", m, scale, EffectKey { method: m, scale, estimand: Estimand::te(k) }));
            out.push((k, "Conditional", m, scale, EffectKey { method: m, scale, estimand: Estimand::conditional(k) }));
        }
    }
    out
}

const STUDY_ESTIMANDS: [Estimand; 6] =
    [Estimand::Sface1, Estimand::Sface2, Estimand::TE1, Estimand::TE2, Estimand::Conditional1, Estimand::Conditional2];

/// Estimates (and, with a bootstrap, SEs and intervals) from one dataset.
/// Key, point estimate and (with a bootstrap) its summary.
type DatasetEffect = (EffectKey, f64, Option<EffectEstimate>);

fn one_dataset(data: &Dataset, spec: &StudySpec, sim: usize) -> crate::Result<Vec<DatasetEffect>> {
    let methods = MethodSet::all();
    let params = crate::identification::SensitivityParams::zero();
    let req = EffectRequest { params: &params, scales: &Scale::BOTH, estimands: &STUDY_ESTIMANDS, check_bounds: false };
    let analysis = analyze(data, &methods, &spec.analysis, None)?;
    let point = effects(&analysis.bundle, &req);
    let estimates = if spec.boot_reps > 0 {
        let plan = BootstrapPlan {
            n_reps: spec.boot_reps,
            seed: derive_key(spec.seed, &[tag::BOOTSTRAP, sim as u64]),
            refit_missingness: true,
        };
        let reps = bootstrap_bundles(data, &methods, &spec.analysis, &plan, Some(&analysis.fits))?;
        Some(summarize(&point, &reps.bundles, &req, plan.seed, Z_975).0)
    } else {
        None
    };
    Ok(point
        .into_iter()
        .filter_map(|(key, v)| {
            let v = v.ok()?;
            let est = estimates.as_ref().and_then(|e| {
                e.iter().find(|x| x.estimand == key.estimand && x.scale == key.scale && x.method == key.method).cloned()
            });
            Some((key, v, est))
        })
        .collect())
}

/// Run one study at fixed parameters. Simulation `r` draws its cohort from
/// a stream that depends only on `(seed, r)`, so sweeps share random numbers
/// across parameter values.
pub fn run_study(spec: &StudySpec, params: &DGMParams) -> crate::Result<StudyResult> {
    spec.validate()?;
    let scenario = Scenario { params: *params, misspec: spec.misspec, log_base: spec.log_base };
    let truth = true_effects(&scenario, spec.n_mc, derive_key(spec.seed, &[tag::TRUTH]))?;
    let per_sim: Vec<Result<Vec<DatasetEffect>, String>> = (0..spec.n_sims)
        .into_par_iter()
        .map(|r| {
            let pop = scenario
                .simulate(spec.n, derive_key(spec.seed, &[tag::SIMULATION, r as u64]))
                .map_err(|e| e.to_string())?;
            one_dataset(&pop.data, spec, r).map_err(|e| e.to_string())
        })
        .collect();
    let failures: Vec<String> = per_sim.iter().filter_map(|r| r.as_ref().err().cloned()).collect();
    if failures.len() == spec.n_sims {
        return Err(SimulationError::AllFailed(spec.n_sims, failures[0].clone()).into());
    }
    let layout = row_layout();
    let mut draws = vec![RowDraws::default(); layout.len()];
    for sim in per_sim.iter().flatten() {
        for (j, (_, _, _, _, key)) in layout.iter().enumerate() {
            let Some((_, v, est)) = sim.iter().find(|(kk, _, _)| kk == key) else { continue };
            draws[j].estimates.push(*v);
            if let Some(e) = est {
                draws[j].ses.push(e.se);
                draws[j].intervals.push((e.ci_low, e.ci_high));
            }
        }
    }
    let rows = layout
        .iter()
        .zip(&draws)
        .map(|(&(k, label, method, scale, _), d)| metrics_row(truth.sface(k, scale), k, label, method, scale, d))
        .collect();
    Ok(StudyResult { sweep_value: None, truth, rows, n_failed: failures.len(), failures, draws })
}

fn metrics_row(
    truth: f64,
    k: Subtype,
    estimand: &'static str,
    method: MethodLabel,
    scale: Scale,
    a: &RowDraws,
) -> MetricsRow {
    let covered = a.intervals.iter().filter(|(lo, hi)| *lo <= truth && truth <= *hi).count();
    let m = mean(&a.estimates);
    let bias = m - truth;
    MetricsRow {
        truth,
        subtype: k,
        estimand,
        method,
        scale,
        mean_estimate: m,
        bias,
        pct_bias: 100.0 * bias / truth,
        cp95: (!a.intervals.is_empty()).then(|| covered as f64 / a.intervals.len() as f64),
        emp_sd: sample_sd(&a.estimates),
        mean_est_se: (!a.ses.is_empty()).then(|| mean(&a.ses)),
        n_ok: a.estimates.len(),
    }
}

/// Run a study over its sweep (or once, without one).
pub fn run_sweep(spec: &StudySpec, params: &DGMParams) -> crate::Result<Vec<StudyResult>> {
    spec.validate()?;
    match &spec.sweep {
        None => Ok(vec![run_study(spec, params)?]),
        Some(s) => s
            .values
            .iter()
            .map(|&v| {
                let mut r = run_study(spec, &params.with(&s.path, v)?)?;
                r.sweep_value = Some(v);
                Ok(r)
            })
            .collect(),
    }
}

/// Metrics as CSV. Difference-scale quantities (truth, estimate, bias,
/// SDs) are reported per 100,000.
pub fn write_metrics_csv<W: std::io::Write>(results: &[StudyResult], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([
        "sweep_value",
        "subtype",
        "estimand",
        "method",
        "scale",
        "truth",
        "mean_estimate",
        "bias",
        "pct_bias",
        "cp95",
        "emp_sd",
        "est_se",
        "n_ok",
        "n_failed",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| v.to_string());
    for res in results {
        for r in &res.rows {
            let s = if r.scale == Scale::Diff { PER_100K } else { 1.0 };
            wtr.write_record([
                opt(res.sweep_value),
                r.subtype.index().to_string(),
                r.estimand.to_string(),
                r.method.to_string(),
                r.scale.to_string(),
                (r.truth * s).to_string(),
                (r.mean_estimate * s).to_string(),
                (r.bias * s).to_string(),
                r.pct_bias.to_string(),
                opt(r.cp95),
                (r.emp_sd * s).to_string(),
                opt(r.mean_est_se.map(|v| v * s)),
                r.n_ok.to_string(),
                res.n_failed.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
