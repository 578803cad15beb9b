mod common;

use common::oracles::*;
use common::rng;
use rand::Rng;
use sface_core::identification::{
    closed_form, lambda_bounds, sface, sface_diff, sface_rr, te, Scale, SensitivityParams, Subtype,
};
use sface_core::profiles::{compatible_profiles, feasible_profiles, AssumptionCombo, Monotonicity, Observation};

#[test]
fn formulas_match_definitions_on_finite_populations() {
    let mut r = rng(11);
    for combo in AssumptionCombo::all() {
        for _ in 0..1000 {
            let pop = random_population(&mut r, combo);
            let (c, params) = truth(&pop);
            params.validate_against(combo).expect("true parameters satisfy the combination");
            for k in Subtype::BOTH {
                for scale in Scale::BOTH {
                    let want = sface_by_definition(&pop, k, scale);
                    let got = sface(&c, &params, k, scale).unwrap();
                    let tol = 1e-12 * want.abs().max(1.0);
                    assert!((got - want).abs() < tol, "{combo} {k:?} {scale:?}: {got} vs {want}");
                }
            }
        }
    }
}

/// Counting gives `λ1·p1(0) ≤ p2(1)` and `λ2·p2(0) ≤ p1(1)`, so the two
/// ratios returned by `lambda_bounds` bound `λ2` and `λ1` respectively.
#[test]
fn true_lambdas_respect_their_bounds() {
    let mut r = rng(12);
    for combo in AssumptionCombo::all() {
        for _ in 0..200 {
            let (c, p) = truth(&random_population(&mut r, combo));
            let (b1, b2) = lambda_bounds(&c).unwrap();
            assert!(p.lambda2 <= b1 + 1e-15 && p.lambda1 <= b2 + 1e-15);
        }
    }
}

#[test]
fn reduction_chain_is_exact() {
    let mut r = rng(13);
    for _ in 0..1000 {
        let c = random_components(&mut r);
        let l1: f64 = r.random_range(0.0..1.0);
        let l2: f64 = r.random_range(0.0..1.0);
        let l20: f64 = r.random_range(0.0..0.5);
        let d = SensitivityParams::with_lambdas(l1, l2);
        let one = |p: &SensitivityParams| sface_diff(&c, p, Subtype::One).ok();
        let two = |p: &SensitivityParams| sface_diff(&c, p, Subtype::Two).ok();
        if let Some(v) = one(&d) {
            assert_eq!(v, closed_form::dmono_sface1(&c, l1, l2));
        }
        if let Some(v) = two(&d) {
            assert_eq!(v, closed_form::dmono_sface2(&c, l1, l2));
        }
        let z = SensitivityParams::zero();
        assert_eq!(one(&z).unwrap(), closed_form::smono_sface1(&c));
        assert_eq!(two(&z).unwrap(), closed_form::smono_sface2(&c));
        assert_eq!(closed_form::dmono_sface1(&c, 0.0, 0.0), closed_form::smono_sface1(&c));
        let n = SensitivityParams { lambda2: l2, lambda2_0: l20, ..SensitivityParams::zero() };
        if let Some(v) = one(&n) {
            assert_eq!(v, closed_form::none2_sface1(&c, l2, l20));
        }
        assert_eq!(closed_form::none2_sface1(&c, l2, 0.0), closed_form::dmono_sface1(&c, 0.0, l2));
    }
}

#[test]
fn rr_equals_te_at_zero_lambda() {
    let mut r = rng(14);
    for _ in 0..500 {
        let c = random_components(&mut r);
        for k in Subtype::BOTH {
            assert_eq!(sface_rr(&c, &SensitivityParams::zero(), k).unwrap(), te(&c, k, Scale::Rr).unwrap());
        }
    }
}

#[test]
fn smono_populations_have_te_rr_equal_to_truth() {
    let mut r = rng(15);
    let ss = AssumptionCombo::new(Monotonicity::SMono, Monotonicity::SMono);
    for _ in 0..200 {
        let pop = random_population(&mut r, ss);
        let (c, _) = truth(&pop);
        for k in Subtype::BOTH {
            let t = te(&c, k, Scale::Rr).unwrap();
            assert!((t - sface_by_definition(&pop, k, Scale::Rr)).abs() < 1e-12);
        }
    }
}

fn ids(combo: &str) -> Vec<u8> {
    feasible_profiles(combo.parse().unwrap()).iter().map(|p| p.id).collect()
}

#[test]
fn feasible_profile_table_reproduced() {
    // Columns in table order: (S,S), (D,D), (S,D), (D,S); one row per profile.
    let marks = [
        [1, 1, 1, 1],
        [1, 1, 1, 1],
        [0, 0, 0, 0],
        [1, 1, 1, 1],
        [0, 0, 0, 0],
        [1, 1, 1, 1],
        [1, 1, 1, 1],
        [0, 1, 0, 1],
        [0, 1, 1, 0],
    ];
    let cols = ["s,s", "d,d", "s,d", "d,s"];
    for (j, combo) in cols.iter().enumerate() {
        let feasible = ids(combo);
        for (id, row) in marks.iter().enumerate() {
            assert_eq!(feasible.contains(&(id as u8)), row[j] == 1, "profile {id} under {combo}");
        }
    }
}

#[test]
fn observation_profile_map_reproduced() {
    let table: [(&str, [&[u8]; 4]); 6] = [
        ("0,0,0", [&[0, 1, 3], &[0, 1, 3], &[0, 1, 3], &[0, 1, 3]]),
        ("0,1,0", [&[5], &[5, 7], &[5], &[5, 7]]),
        ("0,0,1", [&[6], &[6, 8], &[6, 8], &[6]]),
        ("1,0,0", [&[0], &[0], &[0], &[0]]),
        ("1,1,0", [&[3, 5], &[3, 5, 8], &[3, 5, 8], &[3, 5]]),
        ("1,0,1", [&[1, 6], &[1, 6, 7], &[1, 6], &[1, 6, 7]]),
    ];
    let cols = ["s,s", "d,d", "s,d", "d,s"];
    for (obs, row) in table {
        let o: Observation = obs.parse().unwrap();
        for (j, combo) in cols.iter().enumerate() {
            assert_eq!(compatible_profiles(o, combo.parse().unwrap()).unwrap(), row[j], "{obs} under {combo}");
        }
    }
}

#[test]
fn feasible_sets_are_nested_and_compatibility_nonempty() {
    let (ss, dd, nn) = (ids("s,s"), ids("d,d"), ids("n,n"));
    assert!(ss.iter().all(|i| dd.contains(i)) && ss.len() < dd.len());
    assert!(dd.iter().all(|i| nn.contains(i)) && dd.len() < nn.len());
    for combo in AssumptionCombo::all() {
        for o in Observation::ALL {
            assert!(!compatible_profiles(o, combo).unwrap().is_empty(), "{o} under {combo}");
        }
        // Every observation produced by a feasible profile maps back to it.
        for p in feasible_profiles(combo) {
            for a in 0..2 {
                let (y1, y2) = p.observe(a);
                assert!(compatible_profiles(Observation { a, y1, y2 }, combo).unwrap().contains(&p.id));
            }
        }
    }
}
