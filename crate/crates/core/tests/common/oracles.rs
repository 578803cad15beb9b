//! Definition-based computations over finite populations of potential
//! outcome profiles.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sface_core::identification::{ComponentSet, Scale, SensitivityParams, Subtype};
use sface_core::profiles::{all_profiles, feasible_profiles, AssumptionCombo, Profile};

/// Profile counts indexed by profile id.
pub type Population = [u64; 9];

/// Random counts on the profiles feasible under `combo`; every feasible
/// profile appears at least once.
pub fn random_population(r: &mut ChaCha8Rng, combo: AssumptionCombo) -> Population {
    let mut pop = [0u64; 9];
    for p in feasible_profiles(combo) {
        pop[p.id as usize] = r.random_range(1..200);
    }
    pop
}

fn sum_where(pop: &Population, f: impl Fn(Profile) -> bool) -> f64 {
    all_profiles().into_iter().filter(|p| f(*p)).map(|p| pop[p.id as usize] as f64).sum()
}

/// SF-ACE straight from its definition: the contrast of subtype `k` under
/// the two exposures within the stratum free of the other subtype.
pub fn sface_by_definition(pop: &Population, k: Subtype, scale: Scale) -> f64 {
    let (own, oth) = (k.index(), k.other().index());
    let in_stratum = |p: Profile| p.y(oth, 0) == 0 && p.y(oth, 1) == 0;
    let size = sum_where(pop, in_stratum);
    let exposed = sum_where(pop, |p| in_stratum(p) && p.y(own, 1) == 1);
    let unexposed = sum_where(pop, |p| in_stratum(p) && p.y(own, 0) == 1);
    match scale {
        Scale::Diff => exposed / size - unexposed / size,
        Scale::Rr => exposed / unexposed,
    }
}

/// True marginals and switching parameters by counting.
pub fn truth(pop: &Population) -> (ComponentSet, SensitivityParams) {
    let n = sum_where(pop, |_| true);
    let p = |k: usize, a: u8| sum_where(pop, |q| q.y(k, a) == 1) / n;
    let c = ComponentSet::new(p(1, 0), p(1, 1), p(2, 0), p(2, 1));
    let cond = |k: usize, f: &dyn Fn(Profile) -> bool| {
        let base = sum_where(pop, |q| q.y(k, 0) == 1);
        if base == 0.0 {
            0.0
        } else {
            sum_where(pop, |q| q.y(k, 0) == 1 && f(q)) / base
        }
    };
    let params = SensitivityParams {
        lambda1: cond(1, &|q| q.y(2, 1) == 1),
        lambda2: cond(2, &|q| q.y(1, 1) == 1),
        lambda1_0: cond(1, &|q| q.y(1, 1) == 0 && q.y(2, 1) == 0),
        lambda2_0: cond(2, &|q| q.y(1, 1) == 0 && q.y(2, 1) == 0),
    };
    (c, params)
}

/// Random valid marginals: each arm's two risks sum below one.
pub fn random_components(r: &mut ChaCha8Rng) -> ComponentSet {
    let arm = |r: &mut ChaCha8Rng| {
        let a: f64 = r.random_range(0.001..0.4);
        let b: f64 = r.random_range(0.001..0.4);
        (a, b)
    };
    let (p1_0, p2_0) = arm(r);
    let (p1_1, p2_1) = arm(r);
    ComponentSet::new(p1_0, p1_1, p2_0, p2_1)
}
