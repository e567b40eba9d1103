//! Symbolic scenes: attributed objects on a ground plane, the scene sampler,
//! and the spatial relations derived from object coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::seed::SeedPath;
use crate::vocab::{AttrType, AttrValue, Color, Material, Relation, Shape, Size};

/// Largest scene the toolkit supports; bounds Count answers to 0..=10.
pub const MAX_SCENE_OBJECTS: usize = 10;

/// Placement attempts per scene before reporting a capacity error.
pub const REJECTION_BUDGET: usize = 10_000;

const COORD_SCALE: f64 = 10_000.0;

/// Ground-plane coordinate stored in ten-thousandths of a unit, so that the
/// 4-decimal serialization is exact and relations compare integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Coord(pub i32);

impl Coord {
    pub fn from_f64(v: f64) -> Coord {
        Coord((v * COORD_SCALE).round() as i32)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / COORD_SCALE
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:04}", abs / 10_000, abs % 10_000)
    }
}

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let raw = serde_json::value::RawValue::from_string(self.to_string()).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !v.is_finite() || v.abs() > 1.0e5 {
            return Err(serde::de::Error::custom(format!("coordinate out of range: {v}")));
        }
        Ok(Coord::from_f64(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    A,
    B,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::A => "A",
            Condition::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub color: Color,
    pub size: Size,
    pub shape: Shape,
    pub material: Material,
    pub x: Coord,
    pub y: Coord,
}

impl ObjectSpec {
    pub fn attr(&self, ty: AttrType) -> AttrValue {
        match ty {
            AttrType::Size => AttrValue::Size(self.size),
            AttrType::Color => AttrValue::Color(self.color),
            AttrType::Material => AttrValue::Material(self.material),
            AttrType::Shape => AttrValue::Shape(self.shape),
        }
    }

    pub fn has(&self, v: AttrValue) -> bool {
        self.attr(v.attr_type()) == v
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub id: String,
    pub condition: Condition,
    pub objects: Vec<ObjectSpec>,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn all(&self) -> ObjSet {
        ObjSet::full(self.objects.len())
    }

    /// Checks every scene invariant against `config`.
    pub fn validate(&self, config: &SceneConfig) -> Result<()> {
        let n = self.objects.len();
        if n < config.min_objects || n > config.max_objects {
            return Err(Error::Input(format!(
                "scene {} has {n} objects, outside [{}, {}]",
                self.id, config.min_objects, config.max_objects
            )));
        }
        let half = Coord::from_f64(config.arena_half_width).0;
        let margin = Coord::from_f64(config.margin).0;
        for (i, o) in self.objects.iter().enumerate() {
            if o.x.0.abs() > half || o.y.0.abs() > half {
                return Err(Error::Input(format!("scene {} object {i} outside arena", self.id)));
            }
            if !config.allows(o.shape, o.color) {
                return Err(Error::Input(format!(
                    "scene {} object {i} is a {} {} outside condition {}",
                    self.id, o.color, o.shape, config.condition
                )));
            }
            for (j, p) in self.objects.iter().enumerate().skip(i + 1) {
                if (o.x.0 - p.x.0).abs() < margin || (o.y.0 - p.y.0).abs() < margin {
                    return Err(Error::Ambiguous(format!(
                        "scene {} objects {i} and {j} closer than margin",
                        self.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub margin: f64,
    pub arena_half_width: f64,
    pub condition: Condition,
    /// Allowed colors per shape. Shapes absent from the table are unrestricted.
    pub pairing_table: BTreeMap<Shape, BTreeSet<Color>>,
}

impl SceneConfig {
    pub fn new(condition: Condition, min_objects: usize, max_objects: usize) -> Self {
        SceneConfig {
            min_objects,
            max_objects,
            margin: 0.25,
            arena_half_width: 3.0,
            condition,
            pairing_table: default_pairing(condition),
        }
    }

    pub fn allows(&self, shape: Shape, color: Color) -> bool {
        self.pairing_table
            .get(&shape)
            .is_none_or(|colors| colors.contains(&color))
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return Err(Error::Config(format!(
                "object range [{}, {}] is empty or starts at zero",
                self.min_objects, self.max_objects
            )));
        }
        if self.max_objects > MAX_SCENE_OBJECTS {
            return Err(Error::Config(format!(
                "max_objects {} exceeds {MAX_SCENE_OBJECTS}",
                self.max_objects
            )));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if !(self.arena_half_width > 0.0 && self.arena_half_width.is_finite()) {
            return Err(Error::Config(format!(
                "arena_half_width must be positive, got {}",
                self.arena_half_width
            )));
        }
        if Coord::from_f64(self.margin).0 == 0 {
            return Err(Error::Config("margin below coordinate resolution".into()));
        }
        if self.usable_shapes().is_empty() {
            return Err(Error::Config("pairing table forbids every shape".into()));
        }
        Ok(())
    }

    /// Shapes that admit at least one color under the pairing table.
    fn usable_shapes(&self) -> Vec<Shape> {
        Shape::ALL
            .iter()
            .copied()
            .filter(|s| Color::ALL.iter().any(|&c| self.allows(*s, c)))
            .collect()
    }
}

/// Default CoGenT-style pairing: condition A restricts cubes to gray, blue,
/// brown, yellow and cylinders to red, green, purple, cyan; B swaps the two
/// pools. Spheres are unrestricted in both.
pub fn default_pairing(condition: Condition) -> BTreeMap<Shape, BTreeSet<Color>> {
    use Color::*;
    let pool_one: BTreeSet<Color> = [Gray, Blue, Brown, Yellow].into();
    let pool_two: BTreeSet<Color> = [Red, Green, Purple, Cyan].into();
    let (cubes, cylinders) = match condition {
        Condition::A => (pool_one, pool_two),
        Condition::B => (pool_two, pool_one),
    };
    BTreeMap::from([
        (Shape::Cube, cubes),
        (Shape::Cylinder, cylinders),
        (Shape::Sphere, Color::ALL.iter().copied().collect()),
    ])
}

/// Samples one scene. Pure in `(config, id, seed)`.
pub fn sample_scene(config: &SceneConfig, id: &str, seed: &SeedPath) -> Result<Scene> {
    config.validate()?;
    let half = Coord::from_f64(config.arena_half_width).0;
    let margin = Coord::from_f64(config.margin).0;
    // Objects need pairwise-distinct x and y slots `margin` apart.
    let slots = (2 * half / margin) as usize + 1;
    if slots < config.max_objects {
        return Err(Error::Capacity(format!(
            "arena half-width {} fits only {slots} objects at margin {}, need {}",
            config.arena_half_width, config.margin, config.max_objects
        )));
    }

    let mut rng = seed.rng();
    let n = rng.gen_range(config.min_objects..=config.max_objects);
    let shapes = config.usable_shapes();
    let mut objects: Vec<ObjectSpec> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while objects.len() < n {
        attempts += 1;
        if attempts > REJECTION_BUDGET {
            return Err(Error::Capacity(format!(
                "could not place {n} objects with margin {} after {REJECTION_BUDGET} attempts",
                config.margin
            )));
        }
        let x = rng.gen_range(-half..=half);
        let y = rng.gen_range(-half..=half);
        if objects
            .iter()
            .any(|o| (o.x.0 - x).abs() < margin || (o.y.0 - y).abs() < margin)
        {
            continue;
        }
        let shape = *shapes.choose(&mut rng).expect("validated non-empty");
        let colors: Vec<Color> = Color::ALL
            .iter()
            .copied()
            .filter(|&c| config.allows(shape, c))
            .collect();
        let color = *colors.choose(&mut rng).expect("usable shape has a color");
        let size = *Size::ALL.choose(&mut rng).unwrap();
        let material = *Material::ALL.choose(&mut rng).unwrap();
        objects.push(ObjectSpec {
            color,
            size,
            shape,
            material,
            x: Coord(x),
            y: Coord(y),
        });
    }
    Ok(Scene {
        id: id.to_owned(),
        condition: config.condition,
        objects,
    })
}

/// Set of object indices within one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ObjSet(pub u16);

impl ObjSet {
    pub const EMPTY: ObjSet = ObjSet(0);

    pub fn full(n: usize) -> ObjSet {
        ObjSet(((1u32 << n) - 1) as u16)
    }

    pub fn single(i: usize) -> ObjSet {
        ObjSet(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn insert(&mut self, i: usize) {
        self.0 |= 1 << i;
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn intersect(self, other: ObjSet) -> ObjSet {
        ObjSet(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..16).filter(move |&i| self.contains(i))
    }

    /// The sole member, if the set has exactly one.
    pub fn sole(self) -> Option<usize> {
        (self.len() == 1).then(|| self.0.trailing_zeros() as usize)
    }
}

/// For each relation, the objects standing in that relation to each object:
/// `get(Left, j)` is the set of objects left of `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationMap {
    sets: [Vec<ObjSet>; 4],
}

fn rel_slot(r: Relation) -> usize {
    match r {
        Relation::Left => 0,
        Relation::Right => 1,
        Relation::Front => 2,
        Relation::Behind => 3,
    }
}

impl RelationMap {
    pub fn get(&self, r: Relation, j: usize) -> ObjSet {
        self.sets[rel_slot(r)][j]
    }

    pub fn len(&self) -> usize {
        self.sets[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets[0].is_empty()
    }
}

/// Left/right compare x, front/behind compare y: `i ∈ left(j) ⇔ x_i < x_j`,
/// `i ∈ front(j) ⇔ y_i < y_j`. Tied coordinates make a relation undefined.
pub fn derive_relations(scene: &Scene) -> Result<RelationMap> {
    let n = scene.objects.len();
    let mut sets: [Vec<ObjSet>; 4] = std::array::from_fn(|_| vec![ObjSet::EMPTY; n]);
    for (j, b) in scene.objects.iter().enumerate() {
        for (i, a) in scene.objects.iter().enumerate() {
            if i == j {
                continue;
            }
            if a.x == b.x || a.y == b.y {
                return Err(Error::Ambiguous(format!(
                    "scene {}: objects {i} and {j} share a coordinate",
                    scene.id
                )));
            }
            let horizontal = if a.x < b.x { Relation::Left } else { Relation::Right };
            let depth = if a.y < b.y { Relation::Front } else { Relation::Behind };
            sets[rel_slot(horizontal)][j].insert(i);
            sets[rel_slot(depth)][j].insert(i);
        }
    }
    Ok(RelationMap { sets })
}
