use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::program::{Arg, Op, Program, ProgramNode};
use crate::question::synonyms::SynonymTable;
use crate::question::template::{Hole, SkeletonOp, Template, TextToken};
use crate::seed::SeedPath;
use crate::vocab::{AttrType, AttrValue, Relation};

/// Surface phrases for each relation.
pub fn relation_phrases(r: Relation) -> &'static [&'static str] {
    match r {
        Relation::Left => &["left of", "to the left of"],
        Relation::Right => &["right of", "to the right of"],
        Relation::Front => &["in front of"],
        Relation::Behind => &["behind"],
    }
}

/// Concrete values for a template's holes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    /// Per object, attribute values in slot order.
    pub objects: Vec<Vec<AttrValue>>,
    /// Relation `i` links object `i` to object `i + 1`.
    pub relations: Vec<Relation>,
}

impl Template {
    pub fn bind(&self, b: &Binding) -> Result<Program> {
        if b.objects.len() != self.objects()
            || b.relations.len() != self.hop
            || b.objects
                .iter()
                .zip(&self.attr_slots_per_object)
                .any(|(vals, &n)| vals.len() != n)
        {
            return Err(Error::MalformedProgram(format!(
                "binding does not fit template {}",
                self.id
            )));
        }
        let compared = self.family.compared_attr();
        let nodes = self
            .program_skeleton
            .iter()
            .map(|n| {
                let (op, arg) = match (n.op, n.hole) {
                    (SkeletonOp::Scene, _) => (Op::Scene, None),
                    (SkeletonOp::Filter, Some(Hole::Attr { object, slot })) => {
                        let v = b.objects[object][slot];
                        (Op::filter(v.attr_type()), Some(Arg::Value(v)))
                    }
                    (SkeletonOp::Relate, Some(Hole::Relation(i))) => (Op::Relate, Some(Arg::Rel(b.relations[i]))),
                    (SkeletonOp::Unique, _) => (Op::Unique, None),
                    (SkeletonOp::Count, _) => (Op::Count, None),
                    (SkeletonOp::Exist, _) => (Op::Exist, None),
                    (SkeletonOp::Query, _) => (Op::query(compared.expect("comparison template")), None),
                    (SkeletonOp::Equal, _) => (Op::equal(compared.expect("comparison template")), None),
                    (op, hole) => {
                        return Err(Error::MalformedProgram(format!(
                            "template {}: {op:?} with hole {hole:?}",
                            self.id
                        )))
                    }
                };
                Ok(ProgramNode {
                    op,
                    arg,
                    inputs: n.inputs.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Program::new(nodes)
    }

    /// Reads the binding back out of a program with this template's shape.
    pub fn unbind(&self, p: &Program) -> Result<Binding> {
        let p = p.canonicalize();
        let mismatch = || Error::MalformedProgram(format!("program does not match template {}", self.id));
        if p.nodes().len() != self.program_skeleton.len() || p.family() != self.family {
            return Err(mismatch());
        }
        let mut objects: Vec<Vec<AttrValue>> = self
            .attr_slots_per_object
            .iter()
            .map(|&n| Vec::with_capacity(n))
            .collect();
        let mut relations = vec![None; self.hop];
        for (node, sk) in p.nodes().iter().zip(&self.program_skeleton) {
            if node.inputs != sk.inputs {
                return Err(mismatch());
            }
            let op_ok = match sk.op {
                SkeletonOp::Scene => node.op == Op::Scene,
                SkeletonOp::Filter => node.op.filter_type().is_some(),
                SkeletonOp::Unique => node.op == Op::Unique,
                SkeletonOp::Relate => node.op == Op::Relate,
                SkeletonOp::Count => node.op == Op::Count,
                SkeletonOp::Exist => node.op == Op::Exist,
                SkeletonOp::Query => node.op.query_type().is_some(),
                SkeletonOp::Equal => node.op.equal_type().is_some(),
            };
            if !op_ok {
                return Err(mismatch());
            }
            match (sk.hole, node.arg) {
                (Some(Hole::Attr { object, .. }), Some(Arg::Value(v))) => objects[object].push(v),
                (Some(Hole::Relation(i)), Some(Arg::Rel(r))) => relations[i] = Some(r),
                (None, None) => {}
                _ => return Err(mismatch()),
            }
        }
        Ok(Binding {
            objects,
            relations: relations
                .into_iter()
                .map(|r| r.ok_or_else(mismatch))
                .collect::<Result<_>>()?,
        })
    }
}

fn object_phrase<R: rand::Rng>(values: &[AttrValue], plural: bool, syn: &SynonymTable, rng: &mut R) -> Result<String> {
    let mut sorted = values.to_vec();
    sorted.sort();
    let mut words = Vec::new();
    let mut noun = "object";
    for v in &sorted {
        if v.attr_type() == AttrType::Shape {
            noun = v.as_str();
        } else {
            words.push(syn.choose(v.as_str(), rng)?.to_owned());
        }
    }
    let mut n = syn.choose(noun, rng)?.to_owned();
    if plural {
        n.push('s');
    }
    words.push(n);
    Ok(words.join(" "))
}

/// Realizes a bound program as text. Synonym and phrase choices are drawn
/// from `seed`, so one seed always gives one string.
pub fn render_text(bound: &Program, t: &Template, syn: &SynonymTable, seed: &SeedPath) -> Result<String> {
    let binding = t.unbind(bound)?;
    let mut rng = seed.rng();
    let mut parts: Vec<Option<String>> = Vec::new();
    for tok in &t.text_skeleton {
        match *tok {
            TextToken::Word(w) => parts.push(Some(w.to_owned())),
            TextToken::Article => parts.push(None),
            TextToken::Object { object, plural } => {
                parts.push(Some(object_phrase(&binding.objects[object], plural, syn, &mut rng)?))
            }
            TextToken::Relation(i) => {
                let phrase = relation_phrases(binding.relations[i]).choose(&mut rng).unwrap();
                parts.push(Some((*phrase).to_owned()));
            }
            TextToken::AttrNoun => {
                let attr = t
                    .family
                    .compared_attr()
                    .ok_or_else(|| Error::Vocabulary(format!("template {} has no compared attribute", t.id)))?;
                parts.push(Some(attr.noun().to_owned()));
            }
            TextToken::Closing(options) => parts.push(Some((*options.choose(&mut rng).unwrap()).to_owned())),
        }
    }
    let mut words: Vec<String> = Vec::with_capacity(parts.len());
    for i in 0..parts.len() {
        match &parts[i] {
            Some(w) => words.push(w.clone()),
            None => {
                let next = parts[i + 1..].iter().flatten().next().map(String::as_str).unwrap_or("");
                let vowel = next.starts_with(['a', 'e', 'i', 'o', 'u']);
                words.push(if vowel { "an" } else { "a" }.to_owned());
            }
        }
    }
    Ok(words.join(" ").replace(" ?", "?"))
}

/// The template a canonical program was generated from, if any.
pub fn template_for<'a>(p: &Program, templates: &'a [Template]) -> Option<&'a Template> {
    let family = p.family();
    templates
        .iter()
        .filter(|t| t.family == family && t.hop == crate::program::hop_count(p))
        .find(|t| t.unbind(p).is_ok())
}
