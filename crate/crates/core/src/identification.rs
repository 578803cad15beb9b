//! Effects as closed-form functions of the four counterfactual marginals
//! `p_k(a) = P[Yᵏ(a) = 1]` and the subtype-switching parameters.
//!
//! A single difference-scale formula covers every assumption combination.
//! For subtype 1
//!
//! ```text
//! SF-ACE¹ = (p1(1) − (1 − λ₁) p1(0) − λ₂ p2(0)) / (1 − p2(1) − λ₂ p2(0) − λ₂⁰ p2(0))
//! ```
//!
//! and subtype 2 is the mirror image. The monotonicity assumptions enter only
//! as zero constraints on `(λ, λ⁰)`, checked by
//! [`SensitivityParams::validate_against`]. With `λ⁰ = 0` the formula is the
//! D-monotonicity result, and with all parameters zero the S-monotonicity
//! one; see [`closed_form`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiles::{AssumptionCombo, Monotonicity};

/// How far estimated marginals may leave the probability simplex before the
/// set is rejected. IPTW estimates in particular are not constrained to it.
pub const SIMPLEX_SLACK: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentificationError {
    #[error("component {name} = {value} lies outside [0, 1] beyond the allowed slack")]
    InvalidComponent { name: &'static str, value: f64 },
    #[error("p1({arm}) + p2({arm}) = {sum} exceeds 1 beyond the allowed slack")]
    SimplexViolation { arm: u8, sum: f64 },
    #[error("{name} = {value} must lie in [0, 1]")]
    ParamOutOfRange { name: &'static str, value: f64 },
    #[error("{name} = {value} is not allowed: {assumption} on subtype {subtype} forces it to 0")]
    ConstraintViolated { name: &'static str, value: f64, subtype: u8, assumption: Monotonicity },
    #[error(
        "SF-ACE for subtype {subtype}: principal stratum has probability {denominator:.3e} ≤ 0; \
         {name} = {value} is incompatible with the data"
    )]
    DegenerateStratum { subtype: u8, denominator: f64, name: &'static str, value: f64 },
    #[error("{what} is zero")]
    ZeroDenominator { what: &'static str },
    #[error("{name} = {value} exceeds its data-driven bound {bound}")]
    AboveBound { name: &'static str, value: f64, bound: f64 },
}

impl IdentificationError {
    /// True for errors caused by user-supplied parameters rather than data.
    pub fn is_config(&self) -> bool {
        matches!(self, IdentificationError::ParamOutOfRange { .. } | IdentificationError::ConstraintViolated { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subtype {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Subtype {
    pub const BOTH: [Subtype; 2] = [Subtype::One, Subtype::Two];

    pub fn index(self) -> usize {
        match self {
            Subtype::One => 1,
            Subtype::Two => 2,
        }
    }

    pub fn other(self) -> Subtype {
        match self {
            Subtype::One => Subtype::Two,
            Subtype::Two => Subtype::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Diff,
    Rr,
}

impl Scale {
    pub const BOTH: [Scale; 2] = [Scale::Diff, Scale::Rr];

    /// Value of the effect under no effect.
    pub fn null(self) -> f64 {
        match self {
            Scale::Diff => 0.0,
            Scale::Rr => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scale::Diff => "diff",
            Scale::Rr => "rr",
        }
    }
}

impl FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "diff" | "d" => Ok(Scale::Diff),
            "rr" | "ratio" => Ok(Scale::Rr),
            other => Err(format!("unknown scale `{other}` (expected diff or rr)")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Estimand {
    #[serde(rename = "SFACE1")]
    Sface1,
    #[serde(rename = "SFACE2")]
    Sface2,
    Theta,
    TE1,
    TE2,
    Conditional1,
    Conditional2,
}

impl Estimand {
    pub const ALL: [Estimand; 7] = [
        Estimand::Sface1,
        Estimand::Sface2,
        Estimand::Theta,
        Estimand::TE1,
        Estimand::TE2,
        Estimand::Conditional1,
        Estimand::Conditional2,
    ];

    pub fn sface(k: Subtype) -> Self {
        match k {
            Subtype::One => Estimand::Sface1,
            Subtype::Two => Estimand::Sface2,
        }
    }

    pub fn te(k: Subtype) -> Self {
        match k {
            Subtype::One => Estimand::TE1,
            Subtype::Two => Estimand::TE2,
        }
    }

    pub fn conditional(k: Subtype) -> Self {
        match k {
            Subtype::One => Estimand::Conditional1,
            Subtype::Two => Estimand::Conditional2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Estimand::Sface1 => "SFACE1",
            Estimand::Sface2 => "SFACE2",
            Estimand::Theta => "Theta",
            Estimand::TE1 => "TE1",
            Estimand::TE2 => "TE2",
            Estimand::Conditional1 => "Conditional1",
            Estimand::Conditional2 => "Conditional2",
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `p_k(a) = P[Yᵏ(a) = 1]` for both subtypes and both exposure levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub p1_0: f64,
    pub p1_1: f64,
    pub p2_0: f64,
    pub p2_1: f64,
}

impl ComponentSet {
    pub fn new(p1_0: f64, p1_1: f64, p2_0: f64, p2_1: f64) -> Self {
        ComponentSet { p1_0, p1_1, p2_0, p2_1 }
    }

    /// `p_k(a)`.
    pub fn p(&self, k: Subtype, a: u8) -> f64 {
        match (k, a) {
            (Subtype::One, 0) => self.p1_0,
            (Subtype::One, _) => self.p1_1,
            (Subtype::Two, 0) => self.p2_0,
            (Subtype::Two, _) => self.p2_1,
        }
    }

    /// Checks the probability constraints. Returns a warning message when a
    /// constraint is breached within [`SIMPLEX_SLACK`], and an error beyond it.
    pub fn check(&self) -> Result<Option<String>, IdentificationError> {
        let mut warnings = Vec::new();
        for (name, value) in [("p1_0", self.p1_0), ("p1_1", self.p1_1), ("p2_0", self.p2_0), ("p2_1", self.p2_1)] {
            if !(-SIMPLEX_SLACK..=1.0 + SIMPLEX_SLACK).contains(&value) {
                return Err(IdentificationError::InvalidComponent { name, value });
            }
            if !(0.0..=1.0).contains(&value) {
                warnings.push(format!("{name} = {value} outside [0, 1]"));
            }
        }
        for (arm, sum) in [(0u8, self.p1_0 + self.p2_0), (1u8, self.p1_1 + self.p2_1)] {
            if sum > 1.0 + SIMPLEX_SLACK {
                return Err(IdentificationError::SimplexViolation { arm, sum });
            }
            if sum > 1.0 {
                warnings.push(format!("p1({arm}) + p2({arm}) = {sum} exceeds 1"));
            }
        }
        Ok((!warnings.is_empty()).then(|| warnings.join("; ")))
    }

    pub fn scaled(&self, s: f64) -> Self {
        ComponentSet::new(self.p1_0 * s, self.p1_1 * s, self.p2_0 * s, self.p2_1 * s)
    }
}

/// Subtype-switching parameters.
///
/// * `lambda1 = P[Y²(1) = 1 | Y¹(0) = 1]`, switching from subtype 1 to 2.
/// * `lambda2 = P[Y¹(1) = 1 | Y²(0) = 1]`, switching from subtype 2 to 1.
/// * `lambda1_0 = P[Y¹(1) = 0, Y²(1) = 0 | Y¹(0) = 1]`, disease prevented.
/// * `lambda2_0 = P[Y¹(1) = 0, Y²(1) = 0 | Y²(0) = 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivityParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda1_0: f64,
    pub lambda2_0: f64,
}

impl SensitivityParams {
    pub fn zero() -> Self {
        SensitivityParams::default()
    }

    pub fn with_lambdas(lambda1: f64, lambda2: f64) -> Self {
        SensitivityParams { lambda1, lambda2, ..Default::default() }
    }

    fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda1_0", self.lambda1_0),
            ("lambda2_0", self.lambda2_0),
        ]
    }

    /// Range check plus the zero constraints implied by `combo`: S-Mono on
    /// subtype k forces `λ_k = λ_k⁰ = 0`, D-Mono forces `λ_k⁰ = 0`.
    pub fn validate_against(self, combo: AssumptionCombo) -> Result<Self, IdentificationError> {
        for (name, value) in self.named() {
            if !(0.0..=1.0).contains(&value) {
                return Err(IdentificationError::ParamOutOfRange { name, value });
            }
        }
        let per_subtype = [
            (1u8, combo.subtype1, ("lambda1", self.lambda1), ("lambda1_0", self.lambda1_0)),
            (2u8, combo.subtype2, ("lambda2", self.lambda2), ("lambda2_0", self.lambda2_0)),
        ];
        for (subtype, assumption, lambda, lambda0) in per_subtype {
            let forced: &[(&'static str, f64)] = match assumption {
                Monotonicity::SMono => &[lambda, lambda0],
                Monotonicity::DMono => &[lambda0],
                Monotonicity::None => &[],
            };
            if let Some(&(name, value)) = forced.iter().find(|(_, v)| *v != 0.0) {
                return Err(IdentificationError::ConstraintViolated { name, value, subtype, assumption });
            }
        }
        Ok(self)
    }
}

/// SF-ACE on the difference scale.
pub fn sface_diff(c: &ComponentSet, params: &SensitivityParams, subtype: Subtype) -> Result<f64, IdentificationError> {
    // (own, other, λ_own, λ_other, λ_other⁰) for the requested subtype.
    let (p_own_0, p_own_1, p_oth_0, p_oth_1, l_own, l_oth, l0_oth, names) = match subtype {
        Subtype::One => {
            (c.p1_0, c.p1_1, c.p2_0, c.p2_1, params.lambda1, params.lambda2, params.lambda2_0, ("lambda2", "lambda2_0"))
        }
        Subtype::Two => {
            (c.p2_0, c.p2_1, c.p1_0, c.p1_1, params.lambda2, params.lambda1, params.lambda1_0, ("lambda1", "lambda1_0"))
        }
    };
    // Evaluation order keeps the zero-parameter cases bit-identical to the
    // closed forms in `closed_form`.
    let numerator = p_own_1 - (1.0 - l_own) * p_own_0 - l_oth * p_oth_0;
    let denominator = 1.0 - p_oth_1 - l_oth * p_oth_0 - l0_oth * p_oth_0;
    if denominator <= 0.0 || !denominator.is_finite() {
        let (name, value) = if l0_oth != 0.0 { (names.1, l0_oth) } else { (names.0, l_oth) };
        return Err(IdentificationError::DegenerateStratum { subtype: subtype_u8(subtype), denominator, name, value });
    }
    Ok(numerator / denominator)
}

fn subtype_u8(k: Subtype) -> u8 {
    k.index() as u8
}

/// SF-ACE on the risk-ratio scale. Holds with no monotonicity assumption;
/// the `λ⁰` parameters do not enter.
pub fn sface_rr(c: &ComponentSet, params: &SensitivityParams, subtype: Subtype) -> Result<f64, IdentificationError> {
    let (numerator, denominator) = rr_parts(c, params, subtype);
    if denominator == 0.0 {
        return Err(IdentificationError::ZeroDenominator { what: "(1 − λ_k) p_k(0)" });
    }
    Ok(numerator / denominator)
}

fn rr_parts(c: &ComponentSet, params: &SensitivityParams, subtype: Subtype) -> (f64, f64) {
    match subtype {
        Subtype::One => (c.p1_1 - params.lambda2 * c.p2_0, (1.0 - params.lambda1) * c.p1_0),
        Subtype::Two => (c.p2_1 - params.lambda1 * c.p1_0, (1.0 - params.lambda2) * c.p2_0),
    }
}

/// True when the RR numerator is negative, i.e. the switching parameter into
/// `subtype` exceeds its data-driven bound.
pub fn rr_numerator_negative(c: &ComponentSet, params: &SensitivityParams, subtype: Subtype) -> bool {
    rr_parts(c, params, subtype).0 < 0.0
}

pub fn sface(
    c: &ComponentSet,
    params: &SensitivityParams,
    subtype: Subtype,
    scale: Scale,
) -> Result<f64, IdentificationError> {
    match scale {
        Scale::Diff => sface_diff(c, params, subtype),
        Scale::Rr => sface_rr(c, params, subtype),
    }
}

/// Total effect of the exposure on subtype `k`.
pub fn te(c: &ComponentSet, subtype: Subtype, scale: Scale) -> Result<f64, IdentificationError> {
    let (p0, p1) = (c.p(subtype, 0), c.p(subtype, 1));
    match scale {
        Scale::Diff => Ok(p1 - p0),
        Scale::Rr if p0 == 0.0 => Err(IdentificationError::ZeroDenominator { what: "p_k(0)" }),
        Scale::Rr => Ok(p1 / p0),
    }
}

/// Heterogeneity contrast `θ = e1 − e2` between the two subtype effects.
pub fn theta(e1: f64, e2: f64) -> f64 {
    e1 - e2
}

/// Data-driven upper bounds `(λ1_max, λ2_max)`.
pub fn lambda_bounds(c: &ComponentSet) -> Result<(f64, f64), IdentificationError> {
    if c.p2_0 == 0.0 {
        return Err(IdentificationError::ZeroDenominator { what: "p2(0)" });
    }
    if c.p1_0 == 0.0 {
        return Err(IdentificationError::ZeroDenominator { what: "p1(0)" });
    }
    Ok(((c.p1_1 / c.p2_0).min(1.0), (c.p2_1 / c.p1_0).min(1.0)))
}

/// The single-assumption closed forms, kept separate so the general formula
/// can be tested against them.
pub mod closed_form {
    use super::ComponentSet;

    /// S-monotonicity for both subtypes, subtype 1.
    pub fn smono_sface1(c: &ComponentSet) -> f64 {
        (c.p1_1 - c.p1_0) / (1.0 - c.p2_1)
    }

    /// S-monotonicity for both subtypes, subtype 2.
    pub fn smono_sface2(c: &ComponentSet) -> f64 {
        (c.p2_1 - c.p2_0) / (1.0 - c.p1_1)
    }

    /// D-monotonicity, subtype 1.
    pub fn dmono_sface1(c: &ComponentSet, lambda1: f64, lambda2: f64) -> f64 {
        (c.p1_1 + (lambda1 - 1.0) * c.p1_0 - lambda2 * c.p2_0) / (1.0 - c.p2_1 - lambda2 * c.p2_0)
    }

    /// D-monotonicity, subtype 2.
    pub fn dmono_sface2(c: &ComponentSet, lambda1: f64, lambda2: f64) -> f64 {
        (c.p2_1 + (lambda2 - 1.0) * c.p2_0 - lambda1 * c.p1_0) / (1.0 - c.p1_1 - lambda1 * c.p1_0)
    }

    /// No monotonicity on subtype 2, S-monotonicity on subtype 1; subtype 1
    /// effect with the disease-prevention parameter of subtype 2.
    pub fn none2_sface1(c: &ComponentSet, lambda2: f64, lambda2_0: f64) -> f64 {
        (c.p1_1 - c.p1_0 - lambda2 * c.p2_0) / (1.0 - c.p2_1 - lambda2 * c.p2_0 - lambda2_0 * c.p2_0)
    }
}
