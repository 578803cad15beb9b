//! Potential-outcome profiles `(Y¹(0), Y¹(1), Y²(0), Y²(1))` and the
//! monotonicity assumptions that rule some of them out.
//!
//! Everything here is computed by enumerating the sixteen binary quadruples;
//! nothing is tabulated by hand.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfileError {
    #[error("observation has both subtype indicators equal to 1")]
    InconsistentObservation,
    #[error("unknown assumption `{0}` (expected s, d or n)")]
    UnknownAssumption(String),
    #[error("assumption combination must be two comma-separated labels, got `{0}`")]
    BadCombo(String),
}

/// Monotonicity assumption for one subtype.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Monotonicity {
    /// Exposure cannot prevent this subtype: `Yᵏ(0) ≤ Yᵏ(1)`.
    #[serde(rename = "s", alias = "SMono")]
    SMono,
    /// Exposure cannot prevent the disease: `Yᵏ(0) ≤ max(Y¹(1), Y²(1))`.
    #[serde(rename = "d", alias = "DMono")]
    DMono,
    #[serde(rename = "n", alias = "None")]
    None,
}

impl Monotonicity {
    pub const ALL: [Monotonicity; 3] = [Monotonicity::SMono, Monotonicity::DMono, Monotonicity::None];

    pub fn token(self) -> &'static str {
        match self {
            Monotonicity::SMono => "s",
            Monotonicity::DMono => "d",
            Monotonicity::None => "n",
        }
    }
}

impl FromStr for Monotonicity {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, ProfileError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "smono" => Ok(Monotonicity::SMono),
            "d" | "dmono" => Ok(Monotonicity::DMono),
            "n" | "none" => Ok(Monotonicity::None),
            other => Err(ProfileError::UnknownAssumption(other.to_string())),
        }
    }
}

impl fmt::Display for Monotonicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Monotonicity::SMono => "S-Mono",
            Monotonicity::DMono => "D-Mono",
            Monotonicity::None => "None",
        })
    }
}

/// Assumptions for subtype 1 and subtype 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AssumptionCombo {
    pub subtype1: Monotonicity,
    pub subtype2: Monotonicity,
}

impl AssumptionCombo {
    pub const fn new(subtype1: Monotonicity, subtype2: Monotonicity) -> Self {
        AssumptionCombo { subtype1, subtype2 }
    }

    /// The assumption for subtype `k ∈ {1, 2}`.
    pub fn get(self, k: usize) -> Monotonicity {
        if k == 1 {
            self.subtype1
        } else {
            self.subtype2
        }
    }

    /// All nine combinations, subtype 1 varying slowest.
    pub fn all() -> impl Iterator<Item = AssumptionCombo> {
        Monotonicity::ALL
            .into_iter()
            .flat_map(|a| Monotonicity::ALL.into_iter().map(move |b| AssumptionCombo::new(a, b)))
    }
}

impl FromStr for AssumptionCombo {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, ProfileError> {
        let parts: Vec<&str> = s.split(',').collect();
        let [a, b] = parts.as_slice() else {
            return Err(ProfileError::BadCombo(s.to_string()));
        };
        Ok(AssumptionCombo::new(a.parse()?, b.parse()?))
    }
}

impl TryFrom<String> for AssumptionCombo {
    type Error = ProfileError;
    fn try_from(s: String) -> Result<Self, ProfileError> {
        s.parse()
    }
}

impl From<AssumptionCombo> for String {
    fn from(c: AssumptionCombo) -> String {
        format!("{},{}", c.subtype1.token(), c.subtype2.token())
    }
}

impl fmt::Display for AssumptionCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.subtype1, self.subtype2)
    }
}

/// One of the nine profiles compatible with mutual exclusivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Profile {
    pub id: u8,
    /// `[Y¹(0), Y¹(1), Y²(0), Y²(1)]`
    pub values: [u8; 4],
}

/// Quadruples in table order; the index is the profile id.
const ORDER: [[u8; 4]; 9] = [
    [0, 0, 0, 0],
    [0, 0, 0, 1],
    [0, 0, 1, 0],
    [0, 1, 0, 0],
    [1, 0, 0, 0],
    [1, 1, 0, 0],
    [0, 0, 1, 1],
    [1, 0, 0, 1],
    [0, 1, 1, 0],
];

impl Profile {
    /// `Yᵏ(a)` for `k ∈ {1, 2}`, `a ∈ {0, 1}`.
    pub fn y(self, k: usize, a: u8) -> u8 {
        self.values[2 * (k - 1) + a as usize]
    }

    pub fn mutually_exclusive(values: [u8; 4]) -> bool {
        !(values[0] == 1 && values[2] == 1) && !(values[1] == 1 && values[3] == 1)
    }

    /// Whether the profile is allowed by `assumption` on subtype `k`.
    pub fn satisfies(self, k: usize, assumption: Monotonicity) -> bool {
        let prevented = self.y(k, 0) == 1 && self.y(k, 1) == 0;
        let disease_prevented = self.y(k, 0) == 1 && self.y(1, 1) == 0 && self.y(2, 1) == 0;
        match assumption {
            Monotonicity::SMono => !prevented,
            Monotonicity::DMono => !disease_prevented,
            Monotonicity::None => true,
        }
    }

    pub fn feasible_under(self, combo: AssumptionCombo) -> bool {
        self.satisfies(1, combo.subtype1) && self.satisfies(2, combo.subtype2)
    }

    /// Observed `(Y¹, Y²)` for this profile at exposure `a`.
    pub fn observe(self, a: u8) -> (u8, u8) {
        (self.y(1, a), self.y(2, a))
    }

    pub fn label(self) -> String {
        self.values.iter().map(|v| char::from(b'0' + v)).collect()
    }
}

/// The nine mutually exclusive profiles, found by scanning all sixteen
/// quadruples, in table order.
pub fn all_profiles() -> Vec<Profile> {
    let valid: Vec<[u8; 4]> = (0u8..16)
        .map(|bits| [(bits >> 3) & 1, (bits >> 2) & 1, (bits >> 1) & 1, bits & 1])
        .filter(|v| Profile::mutually_exclusive(*v))
        .collect();
    debug_assert_eq!(valid.len(), ORDER.len());
    ORDER
        .iter()
        .enumerate()
        .map(|(id, v)| {
            debug_assert!(valid.contains(v));
            Profile { id: id as u8, values: *v }
        })
        .collect()
}

pub fn feasible_profiles(combo: AssumptionCombo) -> Vec<Profile> {
    all_profiles().into_iter().filter(|p| p.feasible_under(combo)).collect()
}

/// Observed record `(A, Y¹, Y²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Observation {
    pub a: u8,
    pub y1: u8,
    pub y2: u8,
}

impl Observation {
    /// The six possible observations in table order.
    pub const ALL: [Observation; 6] = [
        Observation { a: 0, y1: 0, y2: 0 },
        Observation { a: 0, y1: 1, y2: 0 },
        Observation { a: 0, y1: 0, y2: 1 },
        Observation { a: 1, y1: 0, y2: 0 },
        Observation { a: 1, y1: 1, y2: 0 },
        Observation { a: 1, y1: 0, y2: 1 },
    ];
}

impl FromStr for Observation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v: Vec<u8> = s
            .split(',')
            .map(|t| match t.trim() {
                "0" => Ok(0),
                "1" => Ok(1),
                other => Err(format!("observation entries must be 0 or 1, got `{other}`")),
            })
            .collect::<Result<_, _>>()?;
        match v.as_slice() {
            &[a, y1, y2] => Ok(Observation { a, y1, y2 }),
            _ => Err(format!("observation must be A,Y1,Y2, got `{s}`")),
        }
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.a, self.y1, self.y2)
    }
}

/// Ids of the feasible profiles that would produce `obs`.
pub fn compatible_profiles(obs: Observation, combo: AssumptionCombo) -> Result<Vec<u8>, ProfileError> {
    if obs.y1 == 1 && obs.y2 == 1 {
        return Err(ProfileError::InconsistentObservation);
    }
    Ok(feasible_profiles(combo).into_iter().filter(|p| p.observe(obs.a) == (obs.y1, obs.y2)).map(|p| p.id).collect())
}

/// Serializable feasibility and compatibility tables for one combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileTable {
    pub combo: AssumptionCombo,
    pub profiles: Vec<ProfileRow>,
    pub compatibility: Vec<CompatibilityRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub id: u8,
    pub y1_0: u8,
    pub y1_1: u8,
    pub y2_0: u8,
    pub y2_1: u8,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityRow {
    pub a: u8,
    pub y1: u8,
    pub y2: u8,
    pub profiles: Vec<u8>,
}

pub fn profile_table(combo: AssumptionCombo) -> ProfileTable {
    let profiles = all_profiles()
        .into_iter()
        .map(|p| ProfileRow {
            id: p.id,
            y1_0: p.values[0],
            y1_1: p.values[1],
            y2_0: p.values[2],
            y2_1: p.values[3],
            feasible: p.feasible_under(combo),
        })
        .collect();
    let compatibility = Observation::ALL
        .iter()
        .map(|&o| CompatibilityRow {
            a: o.a,
            y1: o.y1,
            y2: o.y2,
            profiles: compatible_profiles(o, combo).expect("table observations are consistent"),
        })
        .collect();
    ProfileTable { combo, profiles, compatibility }
}

impl ProfileTable {
    /// Aligned plain-text rendering.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "assumptions: subtype 1 {}, subtype 2 {}", self.combo.subtype1, self.combo.subtype2);
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>2}  {:>5} {:>5} {:>5} {:>5}  feasible", "id", "Y1(0)", "Y1(1)", "Y2(0)", "Y2(1)");
        for r in &self.profiles {
            let mark = if r.feasible { "yes" } else { "no" };
            let _ = writeln!(s, "{:>2}  {:>5} {:>5} {:>5} {:>5}  {}", r.id, r.y1_0, r.y1_1, r.y2_0, r.y2_1, mark);
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<11}  compatible profiles", "(A,Y1,Y2)");
        for r in &self.compatibility {
            let ids: Vec<String> = r.profiles.iter().map(u8::to_string).collect();
            let _ = writeln!(s, "{:<11}  {{{}}}", format!("({},{},{})", r.a, r.y1, r.y2), ids.join(","));
        }
        s
    }
}
