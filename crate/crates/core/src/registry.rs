//! The named train, test and diversity sets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bias::{BiasSpec, Draw, FamilySpec};
use crate::error::{Error, Result};
use crate::scene::{Condition, SceneConfig};
use crate::signature::{enumerate_ood_signatures, Composition, Family, SignatureUniverse};
use crate::vocab::{AttrType, AttrType::*, Relation, Relation::*};

const DEFAULT_PAIRINGS: &str = include_str!("../../../configs/comparison_pairings.json");

pub const SET_NAMES: &[&str] = &[
    "TwoAttr-Train",
    "TwoAttr-Test",
    "Compare-Train",
    "Compare-Test",
    "D3-0Hop-Simple",
    "0Hop-A",
    "0Hop-TestFull",
    "1Hop-Full",
    "1Hop-A",
    "1Hop-B",
    "2Hop-A",
    "2Hop-OOD",
    "3Hop-A",
    "3Hop-OOD",
    "3Hop-Full",
];

/// Which scenes a set is generated on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenePool {
    pub condition: Condition,
    pub min_objects: usize,
    pub max_objects: usize,
}

impl ScenePool {
    pub const fn new(condition: Condition, min_objects: usize, max_objects: usize) -> Self {
        ScenePool {
            condition,
            min_objects,
            max_objects,
        }
    }

    /// Stable pool name; also the prefix of its scene ids.
    pub fn label(&self) -> String {
        format!("{:?}{}-{}", self.condition, self.min_objects, self.max_objects)
    }

    pub fn config(&self) -> SceneConfig {
        SceneConfig::new(self.condition, self.min_objects, self.max_objects)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSet {
    pub spec: BiasSpec,
    pub scenes: ScenePool,
}

/// Filter attribute per comparison family, for the train and test sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonPairings {
    pub train: BTreeMap<Family, AttrType>,
    pub test: BTreeMap<Family, AttrType>,
}

impl ComparisonPairings {
    fn validate(&self) -> Result<()> {
        for (side, map) in [("train", &self.train), ("test", &self.test)] {
            for f in Family::ALL.iter().filter(|f| f.compared_attr().is_some()) {
                if !map.contains_key(f) {
                    return Err(Error::Config(format!("comparison pairings: {side} lacks {f}")));
                }
            }
            if let Some(f) = map.keys().find(|f| f.compared_attr().is_none()) {
                return Err(Error::Config(format!(
                    "comparison pairings: {f} is not a comparison family"
                )));
            }
        }
        Ok(())
    }
}

impl Default for ComparisonPairings {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PAIRINGS).expect("bundled pairings parse")
    }
}

/// User overrides on top of the built-in registry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryOverrides {
    #[serde(default)]
    pub comparison_pairings: Option<ComparisonPairings>,
    /// Restricts the compositions used by the OOD sets.
    #[serde(default)]
    pub ood_2hop: Option<Vec<Composition>>,
    /// Replaces or adds whole sets.
    #[serde(default)]
    pub sets: BTreeMap<String, NamedSet>,
}

impl RegistryOverrides {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone)]
pub struct Registry {
    sets: BTreeMap<String, NamedSet>,
}

const COUNT_A: (&[AttrType], &[Relation]) = (&[Color, Size], &[Left, Front]);
const EXIST_A: (&[AttrType], &[Relation]) = (&[Material, Shape], &[Right, Behind]);

fn chain_spec(pools: (&[AttrType], &[Relation]), k: usize, hop: usize) -> FamilySpec {
    FamilySpec::count_or_exist(pools.0, pools.1, [k, k], &[hop], Draw::Spread)
}

fn spec(name: &str, families: Vec<(Family, FamilySpec)>) -> BiasSpec {
    BiasSpec {
        name: name.to_owned(),
        families: families.into_iter().collect(),
    }
}

fn both(f: impl Fn() -> FamilySpec) -> Vec<(Family, FamilySpec)> {
    vec![(Family::Count, f()), (Family::Exist, f())]
}

/// The two 2Hop-A training compositions.
pub fn two_hop_a_compositions() -> [Composition; 2] {
    [
        Composition::new(COUNT_A.0.to_vec(), COUNT_A.1.to_vec()),
        Composition::new(EXIST_A.0.to_vec(), EXIST_A.1.to_vec()),
    ]
}

/// Compositions at distance two from both 2Hop-A training compositions.
pub fn default_ood_compositions() -> Vec<Composition> {
    enumerate_ood_signatures(&two_hop_a_compositions(), 2, &SignatureUniverse::full(2, 2))
        .expect("matching slot counts")
        .into_iter()
        .collect()
}

fn ood_spec(combos: &[Composition], hop: usize) -> FamilySpec {
    let mut s = FamilySpec::count_or_exist(AttrType::ALL, Relation::ALL, [2, 2], &[hop], Draw::Free);
    s.combos = Some(combos.to_vec());
    s
}

fn free_full(hop: usize, max_per_object: usize) -> FamilySpec {
    let mut s = FamilySpec::count_or_exist(AttrType::ALL, Relation::ALL, [1, 2], &[hop], Draw::Free);
    s.max_attrs_per_object = max_per_object;
    s
}

fn comparison_spec(name: &str, pairing: &BTreeMap<Family, AttrType>) -> BiasSpec {
    spec(
        name,
        pairing.iter().map(|(&f, &a)| (f, FamilySpec::comparison(a))).collect(),
    )
}

impl Registry {
    pub fn new(overrides: &RegistryOverrides) -> Result<Self> {
        let pairings = overrides.comparison_pairings.clone().unwrap_or_default();
        pairings.validate()?;
        let ood = match &overrides.ood_2hop {
            Some(combos) => {
                let allowed = default_ood_compositions();
                if let Some(c) = combos.iter().find(|c| !allowed.contains(c)) {
                    return Err(Error::Config(format!(
                        "ood_2hop: {c} is not at distance 2 from both 2Hop-A compositions"
                    )));
                }
                if combos.is_empty() {
                    return Err(Error::Config("ood_2hop: empty".into()));
                }
                combos.clone()
            }
            None => default_ood_compositions(),
        };

        use Condition::{A, B};
        let small_a = ScenePool::new(A, 3, 5);
        let pair_a = ScenePool::new(A, 2, 2);
        let full_a = ScenePool::new(A, 3, 10);
        let full_b = ScenePool::new(B, 3, 10);
        let two_attr = |name: &str, count: &[AttrType], exist: &[AttrType]| {
            spec(
                name,
                vec![
                    (
                        Family::Count,
                        FamilySpec::count_or_exist(count, &[], [2, 2], &[0], Draw::Spread),
                    ),
                    (
                        Family::Exist,
                        FamilySpec::count_or_exist(exist, &[], [2, 2], &[0], Draw::Spread),
                    ),
                ],
            )
        };
        let a_pair = |name: &str, count, exist, k, hop| {
            spec(
                name,
                vec![
                    (Family::Count, chain_spec(count, k, hop)),
                    (Family::Exist, chain_spec(exist, k, hop)),
                ],
            )
        };

        let entries = vec![
            (two_attr("TwoAttr-Train", &[Color, Size], &[Color, Shape]), small_a),
            (two_attr("TwoAttr-Test", &[Color, Shape], &[Color, Size]), small_a),
            (comparison_spec("Compare-Train", &pairings.train), pair_a),
            (comparison_spec("Compare-Test", &pairings.test), pair_a),
            (
                spec(
                    "D3-0Hop-Simple",
                    both(|| chain_spec((&[Color, Size, Shape], &[]), 1, 0)),
                ),
                small_a,
            ),
            (
                spec(
                    "0Hop-A",
                    vec![
                        (Family::Count, chain_spec((COUNT_A.0, &[]), 1, 0)),
                        (Family::Exist, chain_spec((EXIST_A.0, &[]), 1, 0)),
                    ],
                ),
                full_a,
            ),
            (
                spec("0Hop-TestFull", both(|| chain_spec((AttrType::ALL, &[]), 1, 0))),
                full_b,
            ),
            (spec("1Hop-Full", both(|| free_full(1, 1))), full_a),
            (a_pair("1Hop-A", COUNT_A, EXIST_A, 2, 1), full_a),
            (a_pair("1Hop-B", EXIST_A, COUNT_A, 2, 1), full_a),
            (a_pair("2Hop-A", COUNT_A, EXIST_A, 2, 2), full_a),
            (spec("2Hop-OOD", both(|| ood_spec(&ood, 2))), full_b),
            (a_pair("3Hop-A", COUNT_A, EXIST_A, 2, 3), full_b),
            (spec("3Hop-OOD", both(|| ood_spec(&ood, 3))), full_b),
            (spec("3Hop-Full", both(|| free_full(3, 2))), full_a),
        ];
        let mut sets: BTreeMap<String, NamedSet> = entries
            .into_iter()
            .map(|(spec, scenes)| (spec.name.clone(), NamedSet { spec, scenes }))
            .collect();
        for (name, set) in &overrides.sets {
            if set.spec.name != *name {
                return Err(Error::Config(format!("set {name}: spec name is {}", set.spec.name)));
            }
            sets.insert(name.clone(), set.clone());
        }
        for set in sets.values() {
            set.spec.validate()?;
            set.scenes.config().validate()?;
        }
        Ok(Registry { sets })
    }

    pub fn get(&self, name: &str) -> Result<&NamedSet> {
        self.sets
            .get(name)
            .ok_or_else(|| Error::Input(format!("unknown set {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(&RegistryOverrides::default()).expect("built-in registry is valid")
    }
}
