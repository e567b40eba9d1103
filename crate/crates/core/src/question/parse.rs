//! Inverse of the template grammar:
//!
//! ```text
//! question := "how many" OBJ+ count-tail
//!           | "is there" ("a"|"an") OBJ exist-tail
//!           | "does the" OBJ "have the same" NOUN "as the" OBJ ["in the image"] "?"
//! count-tail := "are" ("in the image" | "there") "?"
//!             | "are" REL "the" OBJ ("that is" REL "the" OBJ)* "?"
//! exist-tail := ["in the image"] "?"
//!             | "that is" REL "the" OBJ ("that is" REL "the" OBJ)* "?"
//! REL := ["to the"] "left of" | ["to the"] "right of" | "in front of" | "behind"
//! OBJ := (size | color | material)* (shape | "object")      -- plural in count questions
//! ```
//!
//! Surface words are resolved through the synonym table before matching.

use crate::error::{Error, Result};
use crate::program::{ChainBuilder, Op, Program, ProgramNode};
use crate::question::synonyms::SynonymTable;
use crate::vocab::{AttrType, AttrValue, Relation};

struct Parser<'a> {
    tokens: Vec<String>,
    pos: usize,
    syn: &'a SynonymTable,
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        match lower.strip_suffix('?') {
            Some(stem) => {
                if !stem.is_empty() {
                    out.push(stem.to_owned());
                }
                out.push("?".to_owned());
            }
            None => out.push(lower),
        }
    }
    out
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self, k: usize) -> Option<&str> {
        self.tokens.get(self.pos + k).map(String::as_str)
    }

    fn at(&self, words: &[&str]) -> bool {
        words.iter().enumerate().all(|(k, w)| self.peek(k) == Some(*w))
    }

    fn eat(&mut self, words: &[&str]) -> bool {
        if self.at(words) {
            self.pos += words.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, words: &[&str]) -> Result<()> {
        if self.eat(words) {
            Ok(())
        } else {
            self.err(format!(
                "expected `{}`, found `{}`",
                words.join(" "),
                self.peek(0).unwrap_or("<end>")
            ))
        }
    }

    fn relation(&mut self) -> Result<Relation> {
        for r in Relation::ALL {
            for phrase in crate::question::render::relation_phrases(*r) {
                let words: Vec<&str> = phrase.split(' ').collect();
                if self.eat(&words) {
                    return Ok(*r);
                }
            }
        }
        self.err(format!(
            "expected a relation, found `{}`",
            self.peek(0).unwrap_or("<end>")
        ))
    }

    /// Attribute words then a noun; returns the object's filter values.
    fn object(&mut self, plural: bool) -> Result<Vec<AttrValue>> {
        let mut values: Vec<AttrValue> = Vec::new();
        loop {
            let Some(word) = self.peek(0) else {
                return self.err("object phrase ended early");
            };
            let (canon, is_plural) = match self.syn.resolve(word) {
                Some(c) => (c, false),
                None => match word.strip_suffix('s').and_then(|stem| self.syn.resolve(stem)) {
                    Some(c) => (c, true),
                    None => return self.err(format!("unknown word `{word}`")),
                },
            };
            let value = AttrValue::parse_any(canon);
            let is_noun = canon == "object" || value.is_some_and(|v| v.attr_type() == AttrType::Shape);
            if is_noun {
                if is_plural != plural {
                    return self.err(format!(
                        "expected a {} noun, found `{word}`",
                        if plural { "plural" } else { "singular" }
                    ));
                }
                if let Some(v) = value {
                    values.push(v);
                }
                self.pos += 1;
                values.sort();
                return Ok(values);
            }
            match value {
                Some(v) if !is_plural => {
                    if values.iter().any(|u| u.attr_type() == v.attr_type()) {
                        return self.err(format!("second {} attribute `{word}`", v.attr_type()));
                    }
                    values.push(v);
                    self.pos += 1;
                }
                _ => return self.err(format!("`{word}` is not an attribute or noun")),
            }
        }
    }

    fn finish(&mut self) -> Result<()> {
        self.expect(&["?"])?;
        if self.pos != self.tokens.len() {
            return self.err("text continues after `?`");
        }
        Ok(())
    }

    /// `"that is"? REL "the" OBJ` repeated, as in both relational tails.
    fn chain(&mut self, first_lead: &[&str]) -> Result<(Vec<Relation>, Vec<Vec<AttrValue>>)> {
        let mut rels = Vec::new();
        let mut objects = Vec::new();
        self.expect(first_lead)?;
        loop {
            rels.push(self.relation()?);
            self.expect(&["the"])?;
            objects.push(self.object(false)?);
            if !self.eat(&["that", "is"]) {
                break;
            }
        }
        Ok((rels, objects))
    }

    fn question(&mut self) -> Result<Program> {
        if self.eat(&["how", "many"]) {
            let target = self.object(true)?;
            if self.eat(&["are", "in", "the", "image"]) || self.eat(&["are", "there"]) {
                self.finish()?;
                return build_chain(Op::Count, target, vec![], vec![]);
            }
            let (rels, objs) = self.chain(&["are"])?;
            self.finish()?;
            build_chain(Op::Count, target, rels, objs)
        } else if self.eat(&["is", "there"]) {
            if !(self.eat(&["a"]) || self.eat(&["an"])) {
                return self.err("expected `a` or `an`");
            }
            let target = self.object(false)?;
            if self.at(&["that", "is"]) {
                let (rels, objs) = self.chain(&["that", "is"])?;
                self.finish()?;
                return build_chain(Op::Exist, target, rels, objs);
            }
            self.eat(&["in", "the", "image"]);
            self.finish()?;
            build_chain(Op::Exist, target, vec![], vec![])
        } else if self.eat(&["does", "the"]) {
            let left = self.object(false)?;
            self.expect(&["have", "the", "same"])?;
            let attr = match self.peek(0) {
                Some(w) => match AttrType::ALL.iter().find(|a| a.noun() == w) {
                    Some(a) => *a,
                    None => return self.err(format!("`{w}` is not an attribute name")),
                },
                None => return self.err("question ended early"),
            };
            self.pos += 1;
            self.expect(&["as", "the"])?;
            let right = self.object(false)?;
            self.eat(&["in", "the", "image"]);
            self.finish()?;
            build_comparison(attr, left, right)
        } else {
            self.err("unrecognized question opening")
        }
    }
}

fn build_chain(
    root: Op,
    target: Vec<AttrValue>,
    rels: Vec<Relation>,
    referents: Vec<Vec<AttrValue>>,
) -> Result<Program> {
    let mut b = ChainBuilder::new();
    let mut at = b.scene_index();
    for (i, values) in referents.iter().enumerate().rev() {
        at = b.filters(at, values);
        at = b.push(ProgramNode::unary(Op::Unique, at));
        at = b.push(ProgramNode::relate(rels[i], at));
    }
    at = b.filters(at, &target);
    b.push(ProgramNode::unary(root, at));
    Ok(b.finish()?.canonicalize())
}

fn build_comparison(attr: AttrType, left: Vec<AttrValue>, right: Vec<AttrValue>) -> Result<Program> {
    let mut b = ChainBuilder::new();
    let branch = |values: &[AttrValue], b: &mut ChainBuilder| {
        let at = b.filters(0, values);
        let at = b.push(ProgramNode::unary(Op::Unique, at));
        b.push(ProgramNode::unary(Op::query(attr), at))
    };
    let l = branch(&left, &mut b);
    let r = branch(&right, &mut b);
    b.push(ProgramNode::binary(Op::equal(attr), l, r));
    Ok(b.finish()?.canonicalize())
}

/// Parses question text back to its canonical program.
pub fn parse_question(text: &str, syn: &SynonymTable) -> Result<Program> {
    let mut p = Parser {
        tokens: tokenize(text),
        pos: 0,
        syn,
    };
    p.question()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::signature_of;
    use crate::signature::{CompositionSignature, Family};
    use crate::vocab::{Color, Material, Size};

    fn parse(text: &str) -> Result<Program> {
        parse_question(text, &SynonymTable::default())
    }

    #[test]
    fn shiny_object() {
        let p = parse("Is there a shiny object?").unwrap();
        let mut b = ChainBuilder::new();
        let at = b.filters(0, &[AttrValue::Material(Material::Metal)]);
        b.push(ProgramNode::unary(Op::Exist, at));
        assert_eq!(p, b.finish().unwrap());
    }

    #[test]
    fn big_red_objects_in_canonical_order() {
        let p = parse("How many big red objects are in the image?").unwrap();
        let mut b = ChainBuilder::new();
        let at = b.filters(0, &[AttrValue::Size(Size::Large), AttrValue::Color(Color::Red)]);
        b.push(ProgramNode::unary(Op::Count, at));
        assert_eq!(p, b.finish().unwrap());
    }

    #[test]
    fn comparison_question() {
        let p = parse("Does the rubber object have the same size as the shiny object in the image?").unwrap();
        assert_eq!(
            signature_of(&p),
            CompositionSignature::new(Family::EqualSize, vec![AttrType::Material; 2], vec![])
        );
    }

    #[test]
    fn two_hop_question() {
        let p =
            parse("How many tiny things are to the left of the red ball that is behind the large cylinder?").unwrap();
        assert_eq!(crate::program::hop_count(&p), 2);
        let sig = signature_of(&p);
        assert_eq!(sig.rels.items(), &[Relation::Left, Relation::Behind]);
    }

    #[test]
    fn errors_carry_positions() {
        match parse("How many big glass objects are there?") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse("How many big red object are there?").is_err());
        assert!(parse("Is there a red blue cube?").is_err());
        assert!(parse("Is there a cube? extra").is_err());
        assert!(parse("Why is there a cube?").is_err());
    }
}
