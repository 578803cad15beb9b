//! Analysis datasets: one row per individual holding the exposure, the
//! measured confounders, the subtype-coded outcome and a sampling weight.

mod csv_io;
mod missingness;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, read_csv, write_csv, CsvSchema, LoadReport};
pub use missingness::{missingness_weights, MissingnessModelSpec, MissingnessSummary, WeightedDataset};

use crate::glm::GlmError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: exposure must be 0 or 1, got `{value}`")]
    NonBinaryExposure { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: outcome must be one of 0, 1, 2, 9, got `{value}`")]
    UnknownOutcome { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    InvalidNumber { row: usize, column: String, value: String },
    #[error("row {row}: weight must be finite and nonnegative, got {value}")]
    InvalidWeight { row: usize, value: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("unit {index} has {got} covariates, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("exposure column must contain both 0 and 1 to fit models")]
    ExposureNotVaried,
    #[error("no diseased units (outcome 1, 2 or 9)")]
    NoDiseased,
    #[error("dataset still contains {0} units with unknown subtype (code 9); apply missingness weights first")]
    UnknownSubtypePresent(usize),
    #[error("covariate `{0}` not available for the missingness model")]
    UnknownMissingnessCovariate(String),
    #[error("truncation quantile must lie in (0, 1], got {0}")]
    InvalidTruncation(f64),
    #[error("missingness model: {0}")]
    MissingnessFit(#[source] GlmError),
}

/// Observed outcome code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Outcome {
    DiseaseFree,
    Subtype1,
    Subtype2,
    /// Diseased, subtype not determined.
    UnknownSubtype,
}

impl Outcome {
    pub fn code(self) -> u8 {
        match self {
            Outcome::DiseaseFree => 0,
            Outcome::Subtype1 => 1,
            Outcome::Subtype2 => 2,
            Outcome::UnknownSubtype => 9,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Outcome::DiseaseFree),
            1 => Some(Outcome::Subtype1),
            2 => Some(Outcome::Subtype2),
            9 => Some(Outcome::UnknownSubtype),
            _ => None,
        }
    }

    pub fn is_diseased(self) -> bool {
        self != Outcome::DiseaseFree
    }

    /// Y⁽ᵏ⁾ indicator for `k ∈ {1, 2}`.
    pub fn indicator(self, k: usize) -> f64 {
        match (self, k) {
            (Outcome::Subtype1, 1) | (Outcome::Subtype2, 2) => 1.0,
            _ => 0.0,
        }
    }

    /// Multinomial category (0, 1, 2). `None` for unknown subtype.
    pub fn category(self) -> Option<usize> {
        match self {
            Outcome::DiseaseFree => Some(0),
            Outcome::Subtype1 => Some(1),
            Outcome::Subtype2 => Some(2),
            Outcome::UnknownSubtype => None,
        }
    }
}

impl From<Outcome> for u8 {
    fn from(o: Outcome) -> u8 {
        o.code()
    }
}

impl TryFrom<u8> for Outcome {
    type Error = String;
    fn try_from(code: u8) -> Result<Self, String> {
        Outcome::from_code(code).ok_or_else(|| format!("unknown outcome code {code}"))
    }
}

/// One individual, used to build datasets by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub exposure: u8,
    pub covariates: Vec<f64>,
    pub outcome: Outcome,
    pub weight: f64,
}

impl Unit {
    pub fn new(exposure: u8, covariates: Vec<f64>, outcome: Outcome) -> Self {
        Unit { exposure, covariates, outcome, weight: 1.0 }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }
}

/// Borrowed view of one row.
#[derive(Debug, Clone, Copy)]
pub struct UnitRef<'a> {
    pub exposure: u8,
    pub covariates: &'a [f64],
    pub outcome: Outcome,
    pub weight: f64,
}

/// Immutable, column-oriented dataset.
///
/// Covariates are stored row-major. Optional case covariates (available only
/// for diseased units, `NaN` elsewhere) feed the missing-subtype model and are
/// never used by the outcome or exposure models.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariate_names: Vec<String>,
    case_covariate_names: Vec<String>,
    exposure: Vec<u8>,
    outcome: Vec<Outcome>,
    covariates: Vec<f64>,
    case_covariates: Vec<f64>,
    weights: Vec<f64>,
}

impl Dataset {
    pub fn from_units(covariate_names: Vec<String>, units: Vec<Unit>) -> Result<Self, DataError> {
        let p = covariate_names.len();
        let mut ds = Dataset::with_capacity(covariate_names, Vec::new(), units.len());
        for (index, u) in units.into_iter().enumerate() {
            if u.covariates.len() != p {
                return Err(DataError::DimensionMismatch { index, expected: p, got: u.covariates.len() });
            }
            if u.exposure > 1 {
                return Err(DataError::NonBinaryExposure {
                    row: index + 1,
                    column: "exposure".into(),
                    value: u.exposure.to_string(),
                });
            }
            if !(u.weight.is_finite() && u.weight >= 0.0) {
                return Err(DataError::InvalidWeight { row: index + 1, value: u.weight });
            }
            ds.push_row(u.exposure, &u.covariates, &[], u.outcome, u.weight);
        }
        if ds.is_empty() {
            return Err(DataError::Empty);
        }
        Ok(ds)
    }

    pub(crate) fn with_capacity(covariate_names: Vec<String>, case_covariate_names: Vec<String>, n: usize) -> Self {
        let p = covariate_names.len();
        let q = case_covariate_names.len();
        Dataset {
            covariate_names,
            case_covariate_names,
            exposure: Vec::with_capacity(n),
            outcome: Vec::with_capacity(n),
            covariates: Vec::with_capacity(n * p),
            case_covariates: Vec::with_capacity(n * q),
            weights: Vec::with_capacity(n),
        }
    }

    /// Append a row; `case` may be empty, meaning all case covariates missing.
    pub(crate) fn push_row(&mut self, exposure: u8, x: &[f64], case: &[f64], outcome: Outcome, weight: f64) {
        self.exposure.push(exposure);
        self.covariates.extend_from_slice(x);
        if case.is_empty() {
            self.case_covariates.extend(std::iter::repeat_n(f64::NAN, self.case_covariate_names.len()));
        } else {
            self.case_covariates.extend_from_slice(case);
        }
        self.outcome.push(outcome);
        self.weights.push(weight);
    }

    /// Attach case-only covariates (one row per unit, `NaN` where unavailable).
    pub fn with_case_covariates(mut self, names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        if rows.len() != self.len() {
            return Err(DataError::DimensionMismatch { index: rows.len(), expected: self.len(), got: rows.len() });
        }
        let mut flat = Vec::with_capacity(rows.len() * names.len());
        for (index, r) in rows.into_iter().enumerate() {
            if r.len() != names.len() {
                return Err(DataError::DimensionMismatch { index, expected: names.len(), got: r.len() });
            }
            flat.extend(r);
        }
        self.case_covariate_names = names;
        self.case_covariates = flat;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.exposure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposure.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn case_covariate_names(&self) -> &[String] {
        &self.case_covariate_names
    }

    pub fn exposure(&self) -> &[u8] {
        &self.exposure
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcome
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn covariates(&self, i: usize) -> &[f64] {
        let p = self.dim();
        &self.covariates[i * p..(i + 1) * p]
    }

    pub fn case_covariates(&self, i: usize) -> &[f64] {
        let q = self.case_covariate_names.len();
        &self.case_covariates[i * q..(i + 1) * q]
    }

    pub fn unit(&self, i: usize) -> UnitRef<'_> {
        UnitRef {
            exposure: self.exposure[i],
            covariates: self.covariates(i),
            outcome: self.outcome[i],
            weight: self.weights[i],
        }
    }

    pub fn units(&self) -> impl ExactSizeIterator<Item = UnitRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.unit(i))
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn count_unknown_subtype(&self) -> usize {
        self.outcome.iter().filter(|o| **o == Outcome::UnknownSubtype).count()
    }

    /// Errors unless the dataset is ready for outcome/exposure model fitting.
    pub fn check_fittable(&self) -> Result<(), DataError> {
        if self.is_empty() {
            return Err(DataError::Empty);
        }
        let unknown = self.count_unknown_subtype();
        if unknown > 0 {
            return Err(DataError::UnknownSubtypePresent(unknown));
        }
        let exposed = self.exposure.iter().filter(|a| **a == 1).count();
        if exposed == 0 || exposed == self.len() {
            return Err(DataError::ExposureNotVaried);
        }
        Ok(())
    }

    /// Rows selected by `indices` (repeats allowed), in that order.
    pub fn resample(&self, indices: &[usize]) -> Dataset {
        let mut out =
            Dataset::with_capacity(self.covariate_names.clone(), self.case_covariate_names.clone(), indices.len());
        for &i in indices {
            out.push_row(
                self.exposure[i],
                self.covariates(i),
                self.case_covariates(i),
                self.outcome[i],
                self.weights[i],
            );
        }
        out
    }

    /// Keep rows for which `keep` is true, replacing weights by `weight(i)`.
    pub(crate) fn filter_reweight(&self, keep: impl Fn(usize) -> bool, weight: impl Fn(usize) -> f64) -> Dataset {
        let mut out =
            Dataset::with_capacity(self.covariate_names.clone(), self.case_covariate_names.clone(), self.len());
        for i in (0..self.len()).filter(|&i| keep(i)) {
            out.push_row(self.exposure[i], self.covariates(i), self.case_covariates(i), self.outcome[i], weight(i));
        }
        out
    }

    /// Value of a named covariate or case covariate for row `i`.
    pub(crate) fn column_lookup(&self, name: &str) -> Option<ColumnRef> {
        if let Some(j) = self.covariate_names.iter().position(|n| n == name) {
            return Some(ColumnRef::Covariate(j));
        }
        self.case_covariate_names.iter().position(|n| n == name).map(ColumnRef::Case)
    }

    pub(crate) fn column_value(&self, i: usize, col: ColumnRef) -> f64 {
        match col {
            ColumnRef::Covariate(j) => self.covariates(i)[j],
            ColumnRef::Case(j) => self.case_covariates(i)[j],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum ColumnRef {
    Covariate(usize),
    Case(usize),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn from_units_checks_dimension() {
        let err = Dataset::from_units(
            names(&["x"]),
            vec![Unit::new(0, vec![1.0], Outcome::DiseaseFree), Unit::new(1, vec![], Outcome::Subtype1)],
        )
        .unwrap_err();
        assert!(matches!(err, DataError::DimensionMismatch { index: 1, .. }));
    }

    #[test]
    fn negative_weight_rejected() {
        let err = Dataset::from_units(names(&[]), vec![Unit::new(0, vec![], Outcome::DiseaseFree).with_weight(-1.0)])
            .unwrap_err();
        assert!(matches!(err, DataError::InvalidWeight { .. }));
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(Dataset::from_units(names(&[]), vec![]), Err(DataError::Empty)));
    }

    #[test]
    fn fittable_requires_both_arms_and_known_subtypes() {
        let ds = Dataset::from_units(
            names(&[]),
            vec![Unit::new(1, vec![], Outcome::DiseaseFree), Unit::new(1, vec![], Outcome::Subtype1)],
        )
        .unwrap();
        assert!(matches!(ds.check_fittable(), Err(DataError::ExposureNotVaried)));
        let ds = Dataset::from_units(
            names(&[]),
            vec![Unit::new(0, vec![], Outcome::UnknownSubtype), Unit::new(1, vec![], Outcome::Subtype1)],
        )
        .unwrap();
        assert!(matches!(ds.check_fittable(), Err(DataError::UnknownSubtypePresent(1))));
    }

    #[test]
    fn indicators() {
        assert_eq!(Outcome::Subtype1.indicator(1), 1.0);
        assert_eq!(Outcome::Subtype1.indicator(2), 0.0);
        assert_eq!(Outcome::UnknownSubtype.indicator(1), 0.0);
        assert_eq!(Outcome::from_code(3), None);
    }

    #[test]
    fn resample_repeats_rows() {
        let ds = Dataset::from_units(
            names(&["x"]),
            vec![Unit::new(0, vec![1.0], Outcome::DiseaseFree), Unit::new(1, vec![2.0], Outcome::Subtype2)],
        )
        .unwrap();
        let r = ds.resample(&[1, 1, 0]);
        assert_eq!(r.len(), 3);
        assert_eq!(r.covariates(0), &[2.0]);
        assert_eq!(r.outcomes()[2], Outcome::DiseaseFree);
    }
}
