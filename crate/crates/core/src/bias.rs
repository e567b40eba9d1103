//! Bias specifications: which attribute types, relations and hop counts
//! each question family may use, and the conformance check against them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::QuestionRecord;
use crate::error::{Error, Result};
use crate::program::{hop_count, signature_of};
use crate::signature::{Composition, Family, Multiset};
use crate::vocab::{AttrType, Relation};

/// How a question's attribute (or relation) multiset is drawn from a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draw {
    /// Fewer slots than pool entries: all distinct. Otherwise every pool
    /// entry appears at least once and the surplus repeats.
    Spread,
    /// Independent draws with repetition.
    Free,
}

impl Draw {
    pub fn admits<T: Ord + Copy>(self, items: &Multiset<T>, pool: &BTreeSet<T>) -> bool {
        if !items.items().iter().all(|x| pool.contains(x)) {
            return false;
        }
        match self {
            Draw::Free => true,
            Draw::Spread if items.len() >= pool.len() => items.distinct() == *pool,
            Draw::Spread => items.distinct().len() == items.len(),
        }
    }
}

fn default_max_per_object() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub attr_pool: BTreeSet<AttrType>,
    #[serde(default)]
    pub rel_pool: BTreeSet<Relation>,
    /// Inclusive `[min, max]` number of filter nodes per question.
    pub attrs_per_question: [usize; 2],
    pub hops: BTreeSet<usize>,
    pub attr_draw: Draw,
    pub rel_draw: Draw,
    #[serde(default = "default_max_per_object")]
    pub max_attrs_per_object: usize,
    /// For `equal_*` families: the attribute type both objects are filtered by.
    #[serde(default)]
    pub comparison_filter_attr: Option<AttrType>,
    /// Explicit compositions. When present a question must match one of
    /// them: equal attribute multiset, and relations spread over that
    /// composition's relation set.
    #[serde(default)]
    pub combos: Option<Vec<Composition>>,
}

impl FamilySpec {
    pub fn count_or_exist(
        attr_pool: &[AttrType],
        rel_pool: &[Relation],
        attrs: [usize; 2],
        hops: &[usize],
        draw: Draw,
    ) -> Self {
        FamilySpec {
            attr_pool: attr_pool.iter().copied().collect(),
            rel_pool: rel_pool.iter().copied().collect(),
            attrs_per_question: attrs,
            hops: hops.iter().copied().collect(),
            attr_draw: draw,
            rel_draw: draw,
            max_attrs_per_object: 2,
            comparison_filter_attr: None,
            combos: None,
        }
    }

    pub fn comparison(filter_attr: AttrType) -> Self {
        FamilySpec {
            attr_pool: BTreeSet::from([filter_attr]),
            rel_pool: BTreeSet::new(),
            attrs_per_question: [2, 2],
            hops: BTreeSet::from([0]),
            attr_draw: Draw::Free,
            rel_draw: Draw::Free,
            max_attrs_per_object: 1,
            comparison_filter_attr: Some(filter_attr),
            combos: None,
        }
    }

    /// Whether a question with this composition is allowed, ignoring the
    /// per-object limit (which needs the program).
    pub fn admits(&self, c: &Composition) -> Vec<String> {
        let mut why = Vec::new();
        let k = c.attrs.len();
        let h = c.rels.len();
        if let Some(a) = c.attrs.items().iter().find(|a| !self.attr_pool.contains(a)) {
            why.push(format!("attribute {a} not in pool"));
        }
        if let Some(r) = c.rels.items().iter().find(|r| !self.rel_pool.contains(r)) {
            why.push(format!("relation {r} not in pool"));
        }
        let [lo, hi] = self.attrs_per_question;
        if k < lo || k > hi {
            why.push(format!("{k} attributes outside [{lo}, {hi}]"));
        }
        if !self.hops.contains(&h) {
            why.push(format!("hop count {h} not allowed"));
        }
        if let Some(cmp) = self.comparison_filter_attr {
            if c.attrs.items().iter().any(|&a| a != cmp) {
                why.push(format!("comparison filters must all be {cmp}"));
            }
        }
        if !why.is_empty() {
            return why;
        }
        match &self.combos {
            Some(combos) => {
                let hit = combos
                    .iter()
                    .any(|combo| combo.attrs == c.attrs && Draw::Spread.admits(&c.rels, &combo.rels.distinct()));
                if !hit {
                    why.push(format!("composition {c} matches no configured combination"));
                }
            }
            None => {
                if !self.attr_draw.admits(&c.attrs, &self.attr_pool) {
                    why.push(format!("attributes {c} violate the {:?} draw rule", self.attr_draw));
                }
                if h > 0 && !self.rel_draw.admits(&c.rels, &self.rel_pool) {
                    why.push(format!("relations {c} violate the {:?} draw rule", self.rel_draw));
                }
            }
        }
        why
    }

    fn validate(&self, family: Family) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("{family}: {m}")));
        let [lo, hi] = self.attrs_per_question;
        if lo > hi {
            return bad(format!("attrs_per_question [{lo}, {hi}] is empty"));
        }
        if self.attr_pool.is_empty() && hi > 0 {
            return bad("attribute pool is empty".into());
        }
        if self.hops.is_empty() {
            return bad("no hop counts allowed".into());
        }
        if self.hops.iter().any(|&h| h > 0) && self.rel_pool.is_empty() && self.combos.is_none() {
            return bad("hops > 0 need a relation pool".into());
        }
        if self.max_attrs_per_object == 0 {
            return bad("max_attrs_per_object must be positive".into());
        }
        match (family.compared_attr(), self.comparison_filter_attr) {
            (Some(_), None) => return bad("comparison families need comparison_filter_attr".into()),
            (None, Some(_)) => return bad("only comparison families take comparison_filter_attr".into()),
            (Some(_), Some(a)) => {
                if self.hops != BTreeSet::from([0]) || self.attrs_per_question != [2, 2] || !self.attr_pool.contains(&a)
                {
                    return bad("comparison questions filter two objects by one attribute at hop 0".into());
                }
            }
            (None, None) => {}
        }
        if let Some(combos) = &self.combos {
            if combos.is_empty() {
                return bad("combination list is empty".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub name: String,
    /// Allowed families; a family absent from the map is not allowed.
    pub families: BTreeMap<Family, FamilySpec>,
}

impl BiasSpec {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::Config(format!("{}: no family allowed", self.name)));
        }
        for (f, spec) in &self.families {
            spec.validate(*f)
                .map_err(|e| Error::Config(format!("{}: {e}", self.name)))?;
        }
        Ok(())
    }

    pub fn allowed(&self, f: Family) -> bool {
        self.families.contains_key(&f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub record_id: String,
    pub reasons: Vec<String>,
}

/// Checks a record against a bias spec. Violations are data, not faults.
pub fn check_conformance(q: &QuestionRecord, b: &BiasSpec) -> std::result::Result<(), Violation> {
    let mut reasons = Vec::new();
    let sig = signature_of(&q.program);
    if sig != q.signature {
        reasons.push("stored signature differs from the program's".to_owned());
    }
    if hop_count(&q.program) != q.hop {
        reasons.push("stored hop differs from the program's".to_owned());
    }
    match b.families.get(&sig.family) {
        None => reasons.push(format!("family {} not allowed in {}", sig.family, b.name)),
        Some(spec) => {
            reasons.extend(spec.admits(&sig.composition()));
            if let Some(run) = q
                .program
                .filter_runs()
                .into_iter()
                .find(|r| r.len() > spec.max_attrs_per_object)
            {
                reasons.push(format!(
                    "an object carries {} attributes, limit {}",
                    run.len(),
                    spec.max_attrs_per_object
                ));
            }
        }
    }
    if reasons.is_empty() {
        Ok(())
    } else {
        Err(Violation {
            record_id: q.id.clone(),
            reasons,
        })
    }
}

/// Every violation in a dataset.
pub fn audit<'a>(records: impl IntoIterator<Item = &'a QuestionRecord>, b: &BiasSpec) -> Vec<Violation> {
    records
        .into_iter()
        .filter_map(|q| check_conformance(q, b).err())
        .collect()
}
