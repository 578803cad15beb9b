//! Shared inputs for the benchmarks.

use sface_core::simulation::{DGMParams, Scenario};
use sface_core::Dataset;

/// A Study-I cohort of `n` people.
pub fn cohort(n: usize, seed: u64) -> Dataset {
    Scenario::new(DGMParams::study_one()).simulate(n, seed).expect("study-I parameters are feasible").data
}
