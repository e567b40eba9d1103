//! Composition signatures and the slot edit distance used to build
//! out-of-distribution test sets.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::vocab::{AttrType, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    Count,
    Exist,
    EqualColor,
    EqualSize,
    EqualShape,
    EqualMaterial,
}

impl Family {
    pub const ALL: &'static [Family] = &[
        Family::Count,
        Family::Exist,
        Family::EqualColor,
        Family::EqualSize,
        Family::EqualShape,
        Family::EqualMaterial,
    ];

    /// The attribute compared by an `equal_*` family.
    pub fn compared_attr(self) -> Option<AttrType> {
        match self {
            Family::EqualColor => Some(AttrType::Color),
            Family::EqualSize => Some(AttrType::Size),
            Family::EqualShape => Some(AttrType::Shape),
            Family::EqualMaterial => Some(AttrType::Material),
            Family::Count | Family::Exist => None,
        }
    }

    pub fn equal_for(attr: AttrType) -> Family {
        match attr {
            AttrType::Color => Family::EqualColor,
            AttrType::Size => Family::EqualSize,
            AttrType::Shape => Family::EqualShape,
            AttrType::Material => Family::EqualMaterial,
        }
    }

    pub fn is_boolean(self) -> bool {
        self != Family::Count
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Count => "Count",
            Family::Exist => "Exist",
            Family::EqualColor => "EqualColor",
            Family::EqualSize => "EqualSize",
            Family::EqualShape => "EqualShape",
            Family::EqualMaterial => "EqualMaterial",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sorted multiset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Multiset<T: Ord>(Vec<T>);

impl<T: Ord + Copy> Multiset<T> {
    pub fn new(mut items: Vec<T>) -> Self {
        items.sort();
        Multiset(items)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.0
    }

    pub fn distinct(&self) -> BTreeSet<T> {
        self.0.iter().copied().collect()
    }

    pub fn count(&self, x: T) -> usize {
        self.0.iter().filter(|&&y| y == x).count()
    }

    /// Size of the multiset intersection (sum of per-element minimum counts).
    pub fn common(&self, other: &Multiset<T>) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

impl<'de, T: Ord + Copy + Deserialize<'de>> Deserialize<'de> for Multiset<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let items = Vec::<T>::deserialize(d)?;
        if items.windows(2).any(|w| w[0] > w[1]) {
            return Err(serde::de::Error::custom("multiset items must be sorted"));
        }
        Ok(Multiset(items))
    }
}

/// The family-free part of a signature: what edit distance is defined on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Composition {
    pub attrs: Multiset<AttrType>,
    pub rels: Multiset<Relation>,
}

impl Composition {
    pub fn new(attrs: Vec<AttrType>, rels: Vec<Relation>) -> Self {
        Composition {
            attrs: Multiset::new(attrs),
            rels: Multiset::new(rels),
        }
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attrs: Vec<_> = self.attrs.items().iter().map(|a| a.as_str()).collect();
        let rels: Vec<_> = self.rels.items().iter().map(|r| r.as_str()).collect();
        write!(f, "({{{}}}, {{{}}})", attrs.join(","), rels.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionSignature {
    pub family: Family,
    pub attrs: Multiset<AttrType>,
    pub rels: Multiset<Relation>,
}

impl CompositionSignature {
    pub fn new(family: Family, attrs: Vec<AttrType>, rels: Vec<Relation>) -> Self {
        CompositionSignature {
            family,
            attrs: Multiset::new(attrs),
            rels: Multiset::new(rels),
        }
    }

    pub fn composition(&self) -> Composition {
        Composition {
            attrs: self.attrs.clone(),
            rels: self.rels.clone(),
        }
    }
}

/// Minimal number of single-slot substitutions turning `a` into `b`.
/// Attribute and relation slots are matched only within their own kind,
/// so the distance is `(k - |A∩A'|) + (h - |R∩R'|)`.
pub fn edit_distance(a: &Composition, b: &Composition) -> Result<usize> {
    if a.attrs.len() != b.attrs.len() || a.rels.len() != b.rels.len() {
        return Err(Error::Dimension(format!("slot counts differ: {} vs {}", a, b)));
    }
    Ok((a.attrs.len() - a.attrs.common(&b.attrs)) + (a.rels.len() - a.rels.common(&b.rels)))
}

/// Signature distance; the family is ignored.
pub fn signature_distance(a: &CompositionSignature, b: &CompositionSignature) -> Result<usize> {
    edit_distance(&a.composition(), &b.composition())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignatureUniverse {
    pub attr_pool: BTreeSet<AttrType>,
    pub rel_pool: BTreeSet<Relation>,
    pub attr_slots: usize,
    pub rel_slots: usize,
}

impl SignatureUniverse {
    /// All four attribute types and relations.
    pub fn full(attr_slots: usize, rel_slots: usize) -> Self {
        SignatureUniverse {
            attr_pool: AttrType::ALL.iter().copied().collect(),
            rel_pool: Relation::ALL.iter().copied().collect(),
            attr_slots,
            rel_slots,
        }
    }

    /// Every composition in the universe, in sorted order.
    pub fn compositions(&self) -> Vec<Composition> {
        let attrs: Vec<AttrType> = self.attr_pool.iter().copied().collect();
        let rels: Vec<Relation> = self.rel_pool.iter().copied().collect();
        let attr_sets = multisets(&attrs, self.attr_slots);
        let rel_sets = multisets(&rels, self.rel_slots);
        let mut out = Vec::with_capacity(attr_sets.len() * rel_sets.len());
        for a in &attr_sets {
            for r in &rel_sets {
                out.push(Composition::new(a.clone(), r.clone()));
            }
        }
        out.sort();
        out
    }

    pub fn contains(&self, c: &Composition) -> bool {
        c.attrs.len() == self.attr_slots
            && c.rels.len() == self.rel_slots
            && c.attrs.items().iter().all(|a| self.attr_pool.contains(a))
            && c.rels.items().iter().all(|r| self.rel_pool.contains(r))
    }
}

/// All size-`k` multisets over `pool` (combinations with repetition), each
/// as a non-decreasing vector following `pool`'s order.
pub fn multisets<T: Copy>(pool: &[T], k: usize) -> Vec<Vec<T>> {
    fn go<T: Copy>(pool: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            go(pool, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(pool, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Compositions of `universe` at edit distance exactly `d` from every
/// training composition.
pub fn enumerate_ood_signatures<'a>(
    train: impl IntoIterator<Item = &'a Composition>,
    d: usize,
    universe: &SignatureUniverse,
) -> Result<BTreeSet<Composition>> {
    let train: Vec<&Composition> = train.into_iter().collect();
    for t in &train {
        if t.attrs.len() != universe.attr_slots || t.rels.len() != universe.rel_slots {
            return Err(Error::Dimension(format!(
                "training composition {t} does not have {} attribute and {} relation slots",
                universe.attr_slots, universe.rel_slots
            )));
        }
    }
    let mut out = BTreeSet::new();
    'candidates: for c in universe.compositions() {
        for t in &train {
            if edit_distance(&c, t)? != d {
                continue 'candidates;
            }
        }
        out.insert(c);
    }
    Ok(out)
}
