mod common;

use common::*;
use rand::Rng;
use rand_distr::StandardNormal;
use sface_core::data::{
    load_csv, missingness_weights, read_csv, write_csv, CsvSchema, Dataset, MissingnessModelSpec, Unit,
};
use sface_core::glm::FitOptions;
use sface_core::stats::quantile_type7;
use sface_core::Outcome;

#[test]
fn csv_round_trip_is_identity() {
    let data = observational(500, 21);
    let case: Vec<Vec<f64>> = data
        .outcomes()
        .iter()
        .enumerate()
        .map(|(i, o)| vec![if o.is_diseased() { i as f64 / 7.0 } else { f64::NAN }])
        .collect();
    let units: Vec<Unit> = data
        .units()
        .enumerate()
        .map(|(i, u)| Unit::new(u.exposure, u.covariates.to_vec(), u.outcome).with_weight(1.0 + (i % 5) as f64 / 3.0))
        .collect();
    let data = Dataset::from_units(data.covariate_names().to_vec(), units)
        .unwrap()
        .with_case_covariates(vec!["stage".into()], case)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&data, std::fs::File::create(&path).unwrap()).unwrap();
    let back = load_csv(&path, &CsvSchema::canonical(&data)).unwrap();
    assert_eq!(back.rejected_rows, 0);
    let b = back.dataset;
    assert_eq!(b.len(), data.len());
    assert_eq!(b.exposure(), data.exposure());
    assert_eq!(b.outcomes(), data.outcomes());
    assert_eq!(b.weights(), data.weights());
    for i in 0..data.len() {
        assert_eq!(b.covariates(i), data.covariates(i));
        let (x, y) = (b.case_covariates(i)[0], data.case_covariates(i)[0]);
        assert!(x == y || (x.is_nan() && y.is_nan()));
    }
}

#[test]
fn schema_maps_by_name() {
    let text = "id,y,age,a\n1,0,50,1\n2,1,61,0\n3,2,NA,1\n4,0,44,0\n";
    let schema = CsvSchema {
        exposure: "a".into(),
        outcome: "y".into(),
        covariates: vec!["age".into()],
        weight: None,
        case_covariates: vec![],
    };
    let r = read_csv(text.as_bytes(), &schema).unwrap();
    assert_eq!(r.rejected_rows, 1);
    assert_eq!(r.dataset.len(), 3);
    assert_eq!(r.dataset.outcomes(), &[Outcome::DiseaseFree, Outcome::Subtype1, Outcome::DiseaseFree]);
}

/// Missingness driven by a case-only covariate, modelled correctly.
fn with_missing_subtypes(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let base = observational(n, seed);
    let mut case = Vec::with_capacity(n);
    let units: Vec<Unit> = base
        .units()
        .map(|u| {
            let mut outcome = u.outcome;
            if u.outcome.is_diseased() {
                let z: f64 = r.sample(StandardNormal);
                case.push(vec![z]);
                if r.random::<f64>() > sigmoid(0.8 + 0.9 * z) {
                    outcome = Outcome::UnknownSubtype;
                }
            } else {
                case.push(vec![f64::NAN]);
            }
            Unit::new(u.exposure, u.covariates.to_vec(), outcome)
        })
        .collect();
    Dataset::from_units(base.covariate_names().to_vec(), units)
        .unwrap()
        .with_case_covariates(vec!["z".into()], case)
        .unwrap()
}

#[test]
fn horvitz_thompson_recovers_diseased_count() {
    let data = with_missing_subtypes(40_000, 22);
    let diseased = data.outcomes().iter().filter(|o| o.is_diseased()).count() as f64;
    let unknown = data.count_unknown_subtype();
    assert!(unknown > 100);
    let spec = MissingnessModelSpec { covariates: vec!["z".into()], truncation_quantile: 1.0 };
    let w = missingness_weights(&data, &spec, &FitOptions::default()).unwrap();
    assert_eq!(w.dataset.count_unknown_subtype(), 0);
    assert_eq!(w.dataset.len(), data.len() - unknown);
    let total: f64 =
        w.dataset.outcomes().iter().zip(w.dataset.weights()).filter(|(o, _)| o.is_diseased()).map(|(_, w)| w).sum();
    assert!((total - diseased).abs() / diseased < 0.15, "{total} vs {diseased}");
    // Disease-free units keep their weights.
    for (o, w) in w.dataset.outcomes().iter().zip(w.dataset.weights()) {
        if !o.is_diseased() {
            assert_eq!(*w, 1.0);
        }
    }
}

#[test]
fn truncation_uses_type7_quantile() {
    assert_eq!(quantile_type7(&[1.0, 1.0, 10.0], 0.5), Some(1.0));
    // Two strata observed with probability 0.8 and 0.2: raw weights 1.25
    // and 5. At the 0.5 quantile every weight is cut to 1.25.
    let mut units = Vec::new();
    let mut case = Vec::new();
    for (stage, observed, missing) in [(0.0, 40, 10), (1.0, 4, 16)] {
        for j in 0..observed + missing {
            let o = if j < observed { Outcome::Subtype1 } else { Outcome::UnknownSubtype };
            units.push(Unit::new((j % 2) as u8, vec![], o));
            case.push(vec![stage]);
        }
    }
    for j in 0..50 {
        units.push(Unit::new((j % 2) as u8, vec![], Outcome::DiseaseFree));
        case.push(vec![f64::NAN]);
    }
    let data = Dataset::from_units(vec![], units).unwrap().with_case_covariates(vec!["stage".into()], case).unwrap();
    let raw = missingness_weights(
        &data,
        &MissingnessModelSpec { covariates: vec!["stage".into()], truncation_quantile: 1.0 },
        &FitOptions::default(),
    )
    .unwrap();
    let mut ws: Vec<f64> = raw
        .dataset
        .outcomes()
        .iter()
        .zip(raw.dataset.weights())
        .filter(|(o, _)| o.is_diseased())
        .map(|(_, w)| *w)
        .collect();
    ws.sort_by(f64::total_cmp);
    assert!((ws[0] - 1.25).abs() < 1e-9 && (ws[ws.len() - 1] - 5.0).abs() < 1e-9);
    let cut = missingness_weights(
        &data,
        &MissingnessModelSpec { covariates: vec!["stage".into()], truncation_quantile: 0.5 },
        &FitOptions::default(),
    )
    .unwrap();
    assert!((cut.summary.truncation_threshold - 1.25).abs() < 1e-9);
    assert_eq!(cut.summary.n_truncated, 4);
    assert!(cut.dataset.weights().iter().all(|w| *w <= 1.25 + 1e-9));
}
