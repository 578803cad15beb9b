//! Estimation of subtype-free average causal effects (SF-ACE) of a binary
//! exposure on a disease with two mutually exclusive subtypes.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`]: ingestion, validation and missing-subtype weighting.
//! * [`glm`]: weighted Newton fitting of the logistic propensity model and the
//!   three-category multinomial outcome model.
//! * [`profiles`]: the potential-outcome profile algebra behind the
//!   monotonicity assumptions.
//! * [`identification`]: closed-form maps from the four counterfactual
//!   marginals to effects, including the subtype-switching sensitivity
//!   parameters.
//! * [`estimators`]: standardization, IPTW and doubly-robust estimates of the
//!   counterfactual marginals.
//! * [`analysis`]: the fit-then-estimate pipeline shared by every driver.
//! * [`inference`]: bootstrap standard errors, Wald intervals and the
//!   heterogeneity test.
//! * [`sensitivity`]: effect grids over the switching probabilities.
//! * [`simulation`]: the synthetic data-generating mechanism and the
//!   Monte-Carlo study harness.

pub mod analysis;
pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod identification;
pub mod inference;
pub mod profiles;
pub mod rng;
pub mod sensitivity;
pub mod simulation;
pub mod stats;

pub use analysis::{AnalysisOptions, ComponentBundle, MethodSet, NuisanceFits};
pub use data::{CsvSchema, Dataset, MissingnessModelSpec, Outcome, Unit};
pub use error::{Error, Result};
pub use estimators::{Augmentation, MethodLabel, PropensityClip};
pub use glm::{ExposureModelFit, FitOptions, OutcomeModelFit};
pub use identification::{ComponentSet, Estimand, Scale, SensitivityParams, Subtype};
pub use inference::{BootstrapPlan, EffectEstimate};
pub use profiles::{AssumptionCombo, Monotonicity, Profile};

/// Difference-scale effects are reported per this many people in study tables.
pub const PER_100K: f64 = 1e5;
