//! Fixed question skeletons. Object references are numbered in text order:
//! object 0 is the counted/tested set (or the left operand of a comparison),
//! and for relational questions object `i + 1` is the referent that
//! relation `i` is taken from.

use crate::signature::Family;
use crate::vocab::AttrType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextToken {
    Word(&'static str),
    /// "a" or "an", agreeing with the next rendered word.
    Article,
    Object {
        object: usize,
        plural: bool,
    },
    Relation(usize),
    /// Name of the attribute a comparison compares ("size").
    AttrNoun,
    /// One of several fixed endings, picked by the render seed.
    Closing(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hole {
    /// The `slot`-th attribute of object `object`.
    Attr {
        object: usize,
        slot: usize,
    },
    Relation(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkeletonOp {
    Scene,
    Filter,
    Unique,
    Relate,
    Count,
    Exist,
    Query,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonNode {
    pub op: SkeletonOp,
    pub hole: Option<Hole>,
    pub inputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: String,
    pub family: Family,
    pub hop: usize,
    pub attr_slots_per_object: Vec<usize>,
    pub text_skeleton: Vec<TextToken>,
    pub program_skeleton: Vec<SkeletonNode>,
}

pub const COUNT_ZERO_HOP_CLOSINGS: &[&str] = &["are in the image?", "are there?"];
pub const EXIST_ZERO_HOP_CLOSINGS: &[&str] = &["in the image?", "?"];
pub const EQUAL_CLOSINGS: &[&str] = &["?", "in the image?"];

/// Largest number of filters on one object reference in any template.
pub const MAX_SLOTS_PER_OBJECT: usize = 2;
/// Largest number of filters in one relational question.
pub const MAX_ATTRS_PER_QUESTION: usize = 4;
pub const MAX_HOPS: usize = 3;

impl Template {
    pub fn total_attrs(&self) -> usize {
        self.attr_slots_per_object.iter().sum()
    }

    pub fn objects(&self) -> usize {
        self.attr_slots_per_object.len()
    }

    pub fn max_slots(&self) -> usize {
        self.attr_slots_per_object.iter().copied().max().unwrap_or(0)
    }

    /// Count/Exist over a chain of `slots.len() - 1` relations.
    pub fn chain(family: Family, slots: Vec<usize>) -> Template {
        assert!(matches!(family, Family::Count | Family::Exist));
        assert!(!slots.is_empty());
        let hop = slots.len() - 1;
        let count = family == Family::Count;

        let mut text = Vec::new();
        if count {
            text.push(TextToken::Word("How many"));
            text.push(TextToken::Object {
                object: 0,
                plural: true,
            });
        } else {
            text.push(TextToken::Word("Is there"));
            text.push(TextToken::Article);
            text.push(TextToken::Object {
                object: 0,
                plural: false,
            });
        }
        if hop == 0 {
            text.push(TextToken::Closing(if count {
                COUNT_ZERO_HOP_CLOSINGS
            } else {
                EXIST_ZERO_HOP_CLOSINGS
            }));
        } else {
            text.push(TextToken::Word(if count { "are" } else { "that is" }));
            for i in 0..hop {
                if i > 0 {
                    text.push(TextToken::Word("that is"));
                }
                text.push(TextToken::Relation(i));
                text.push(TextToken::Word("the"));
                text.push(TextToken::Object {
                    object: i + 1,
                    plural: false,
                });
            }
            text.push(TextToken::Word("?"));
        }

        // Program runs from the deepest referent outward.
        let mut prog = vec![SkeletonNode {
            op: SkeletonOp::Scene,
            hole: None,
            inputs: vec![],
        }];
        let push = |prog: &mut Vec<SkeletonNode>, op, hole| {
            let at = prog.len() - 1;
            prog.push(SkeletonNode {
                op,
                hole,
                inputs: vec![at],
            });
        };
        for object in (0..=hop).rev() {
            for slot in 0..slots[object] {
                push(&mut prog, SkeletonOp::Filter, Some(Hole::Attr { object, slot }));
            }
            if object > 0 {
                push(&mut prog, SkeletonOp::Unique, None);
                push(&mut prog, SkeletonOp::Relate, Some(Hole::Relation(object - 1)));
            }
        }
        push(
            &mut prog,
            if count { SkeletonOp::Count } else { SkeletonOp::Exist },
            None,
        );

        let tag: Vec<String> = slots.iter().map(|s| s.to_string()).collect();
        Template {
            id: format!("{}-h{hop}-{}", family.as_str().to_lowercase(), tag.join("")),
            family,
            hop,
            attr_slots_per_object: slots,
            text_skeleton: text,
            program_skeleton: prog,
        }
    }

    /// "Does the X have the same <attr> as the Y?" with one filter per object.
    pub fn comparison(attr: AttrType) -> Template {
        let family = Family::equal_for(attr);
        let text = vec![
            TextToken::Word("Does the"),
            TextToken::Object {
                object: 0,
                plural: false,
            },
            TextToken::Word("have the same"),
            TextToken::AttrNoun,
            TextToken::Word("as the"),
            TextToken::Object {
                object: 1,
                plural: false,
            },
            TextToken::Closing(EQUAL_CLOSINGS),
        ];
        let node = |op, hole, inputs: Vec<usize>| SkeletonNode { op, hole, inputs };
        let prog = vec![
            node(SkeletonOp::Scene, None, vec![]),
            node(SkeletonOp::Filter, Some(Hole::Attr { object: 0, slot: 0 }), vec![0]),
            node(SkeletonOp::Unique, None, vec![1]),
            node(SkeletonOp::Query, None, vec![2]),
            node(SkeletonOp::Filter, Some(Hole::Attr { object: 1, slot: 0 }), vec![0]),
            node(SkeletonOp::Unique, None, vec![4]),
            node(SkeletonOp::Query, None, vec![5]),
            node(SkeletonOp::Equal, None, vec![3, 6]),
        ];
        Template {
            id: format!("{}-h0-11", family.as_str().to_lowercase()),
            family,
            hop: 0,
            attr_slots_per_object: vec![1, 1],
            text_skeleton: text,
            program_skeleton: prog,
        }
    }
}

/// The full template grammar: comparison templates, and Count/Exist chains
/// of 0..=3 hops where the deepest referent has at least one attribute,
/// each object has at most two, and the question has at most four.
pub fn all_templates() -> Vec<Template> {
    let mut out = Vec::new();
    for family in [Family::Count, Family::Exist] {
        for hop in 0..=MAX_HOPS {
            for slots in slot_vectors(hop + 1) {
                out.push(Template::chain(family, slots));
            }
        }
    }
    for attr in AttrType::ALL {
        out.push(Template::comparison(*attr));
    }
    out
}

fn slot_vectors(objects: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..objects {
        out = out
            .into_iter()
            .flat_map(|v: Vec<usize>| {
                (0..=MAX_SLOTS_PER_OBJECT).map(move |s| {
                    let mut w = v.clone();
                    w.push(s);
                    w
                })
            })
            .collect();
    }
    out.retain(|v| {
        let total: usize = v.iter().sum();
        *v.last().unwrap() >= 1 && total <= MAX_ATTRS_PER_QUESTION
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holes_match_text_and_hop() {
        for t in all_templates() {
            let rel_holes = t
                .program_skeleton
                .iter()
                .filter(|n| matches!(n.hole, Some(Hole::Relation(_))))
                .count();
            let rel_text = t
                .text_skeleton
                .iter()
                .filter(|x| matches!(x, TextToken::Relation(_)))
                .count();
            assert_eq!(rel_holes, t.hop, "{}", t.id);
            assert_eq!(rel_text, t.hop, "{}", t.id);
            let attr_holes = t
                .program_skeleton
                .iter()
                .filter(|n| matches!(n.hole, Some(Hole::Attr { .. })))
                .count();
            assert_eq!(attr_holes, t.total_attrs(), "{}", t.id);
            let objects = t
                .text_skeleton
                .iter()
                .filter(|x| matches!(x, TextToken::Object { .. }))
                .count();
            assert_eq!(objects, t.objects(), "{}", t.id);
        }
    }

    #[test]
    fn ids_are_unique() {
        let all = all_templates();
        let ids: std::collections::BTreeSet<_> = all.iter().map(|t| t.id.clone()).collect();
        assert_eq!(ids.len(), all.len());
    }
}
