#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sface_core::data::{Dataset, Outcome, Unit};
use sface_core::glm::Design;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn outcome(code: u8) -> Outcome {
    Outcome::from_code(code).unwrap()
}

/// Random design with an intercept, `p_cont` standard normal columns and one
/// binary column.
pub fn random_design(r: &mut ChaCha8Rng, n: usize, p_cont: usize) -> Design {
    let mut names = vec!["(intercept)".to_string()];
    names.extend((0..p_cont).map(|j| format!("z{j}")));
    names.push("b".into());
    let mut values = Vec::with_capacity(n * names.len());
    for _ in 0..n {
        values.push(1.0);
        for _ in 0..p_cont {
            values.push(r.sample::<f64, _>(StandardNormal));
        }
        values.push(f64::from(u8::from(r.random::<f64>() < 0.4)));
    }
    Design::new(names, n, values)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn draw_binary(r: &mut ChaCha8Rng, design: &Design, beta: &[f64]) -> Vec<bool> {
    (0..design.rows())
        .map(|i| {
            let eta: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            r.random::<f64>() < sigmoid(eta)
        })
        .collect()
}

pub fn draw_categorical(r: &mut ChaCha8Rng, design: &Design, t1: &[f64], t2: &[f64]) -> Vec<u8> {
    (0..design.rows())
        .map(|i| {
            let x = design.row(i);
            let e1: f64 = x.iter().zip(t1).map(|(x, b)| x * b).sum::<f64>().exp();
            let e2: f64 = x.iter().zip(t2).map(|(x, b)| x * b).sum::<f64>().exp();
            let s = 1.0 + e1 + e2;
            let v: f64 = r.random();
            if v < e1 / s {
                1
            } else if v < (e1 + e2) / s {
                2
            } else {
                0
            }
        })
        .collect()
}

/// Observational dataset from known models: two covariates, logistic
/// exposure, multinomial outcome with a positive exposure effect.
pub fn observational(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let units = (0..n)
        .map(|_| {
            let x1 = f64::from(u8::from(r.random::<f64>() < 0.5));
            let x2: f64 = r.sample(StandardNormal);
            let a = u8::from(r.random::<f64>() < sigmoid(-0.3 + 0.6 * x1 + 0.5 * x2));
            let af = f64::from(a);
            let e1 = (-2.5 + 0.6 * af + 0.4 * x1 + 0.3 * x2).exp();
            let e2 = (-3.0 + 0.4 * af + 0.2 * x1 + 0.5 * x2).exp();
            let s = 1.0 + e1 + e2;
            let v: f64 = r.random();
            let y = if v < e1 / s {
                1
            } else if v < (e1 + e2) / s {
                2
            } else {
                0
            };
            Unit::new(a, vec![x1, x2], outcome(y))
        })
        .collect();
    Dataset::from_units(vec!["x1".into(), "x2".into()], units).unwrap()
}

pub mod oracles;
