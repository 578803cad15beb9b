mod common;

use common::*;
use sface_core::analysis::{AnalysisOptions, EffectRequest, MethodSet};
use sface_core::data::{Dataset, Unit};
use sface_core::identification::{Estimand, Scale, SensitivityParams};
use sface_core::inference::{estimate, BootstrapPlan};
use sface_core::{MethodLabel, Outcome};

fn run(data: &Dataset, plan: &BootstrapPlan) -> sface_core::inference::EstimationResult {
    let params = SensitivityParams::zero();
    let req = EffectRequest { params: &params, scales: &Scale::BOTH, estimands: &Estimand::ALL, check_bounds: false };
    estimate(data, &MethodSet::all(), &AnalysisOptions::default(), plan, &req).unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let data = observational(2000, 41);
    let plan = BootstrapPlan::new(40, 9);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&data, &plan));
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&data, &plan));
    assert_eq!(one.estimates, four.estimates);
    assert_eq!(one.replicates.values, four.replicates.values);
}

#[test]
fn seeds_change_se_not_point() {
    let data = observational(1500, 42);
    let a = run(&data, &BootstrapPlan::new(30, 1));
    let b = run(&data, &BootstrapPlan::new(30, 2));
    for (x, y) in a.estimates.iter().zip(&b.estimates) {
        assert_eq!(x.point, y.point);
        assert_ne!(x.se, y.se);
    }
}

#[test]
fn estimates_are_complete_and_consistent() {
    let data = observational(1500, 43);
    let res = run(&data, &BootstrapPlan::new(30, 3));
    // Three methods × two scales × (SFACE1, SFACE2, Theta, TE1, TE2), plus
    // the conditional estimands for standardization.
    assert_eq!(res.estimates.len(), 3 * 2 * 5 + 2 * 2);
    for e in &res.estimates {
        assert!(e.se >= 0.0 && e.ci_low <= e.point && e.point <= e.ci_high);
        assert_eq!(e.n_boot, 30);
        let want_p = e.estimand == Estimand::Theta && e.scale == Scale::Diff;
        assert_eq!(e.p_value.is_some(), want_p);
        if matches!(e.estimand, Estimand::Conditional1 | Estimand::Conditional2) {
            assert_eq!(e.method, MethodLabel::Standardization);
        }
    }
    assert_eq!(res.counts.outcome, 31);
    assert_eq!(res.counts.exposure, 31);
}

#[test]
fn missingness_model_refit_per_replicate() {
    let base = observational(1500, 44);
    let units: Vec<Unit> = base
        .units()
        .enumerate()
        .map(|(i, u)| {
            let o = if u.outcome.is_diseased() && i % 4 == 0 { Outcome::UnknownSubtype } else { u.outcome };
            Unit::new(u.exposure, u.covariates.to_vec(), o)
        })
        .collect();
    let data = Dataset::from_units(base.covariate_names().to_vec(), units).unwrap();
    let refit = run(&data, &BootstrapPlan::new(20, 5));
    assert_eq!(refit.counts.missingness, 21);
    let fixed = run(&data, &BootstrapPlan { refit_missingness: false, ..BootstrapPlan::new(20, 5) });
    assert_eq!(fixed.counts.missingness, 1);
    assert!(refit.analysis.missingness.n_removed > 0);
}
