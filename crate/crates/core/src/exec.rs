//! Program semantics over scenes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::program::{Op, Program};
use crate::scene::{derive_relations, ObjSet, RelationMap, Scene, MAX_SCENE_OBJECTS};
use crate::vocab::AttrValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Answer {
    Count(u8),
    Bool(bool),
}

impl Answer {
    pub fn as_string(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Count(n) => write!(f, "{n}"),
            Answer::Bool(true) => f.write_str("yes"),
            Answer::Bool(false) => f.write_str("no"),
        }
    }
}

impl FromStr for Answer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Answer::Bool(true)),
            "no" => Ok(Answer::Bool(false)),
            _ => match s.parse::<u8>() {
                Ok(n) if n as usize <= MAX_SCENE_OBJECTS && s == n.to_string() => Ok(Answer::Count(n)),
                _ => Err(format!("answer `{s}` is not in the answer vocabulary")),
            },
        }
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("unique at node {node} got {size} objects")]
    Ambiguous { node: usize, size: usize },
    #[error("malformed program: {0}")]
    Malformed(String),
}

impl From<ExecError> for Error {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::Ambiguous { .. } => Error::Ambiguous(e.to_string()),
            ExecError::Malformed(m) => Error::MalformedProgram(m),
        }
    }
}

/// Interpreter stack value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecValue {
    Set(ObjSet),
    Object(usize),
    Attr(AttrValue),
    Answer(Answer),
}

/// Evaluates every node in order; `values[i]` is node `i`'s output.
pub fn execute_trace(p: &Program, s: &Scene, rel: &RelationMap) -> Result<Vec<ExecValue>, ExecError> {
    let mut values: Vec<ExecValue> = Vec::with_capacity(p.nodes().len());
    let malformed = |i: usize, what: &str| ExecError::Malformed(format!("node {i}: {what}"));
    for (i, node) in p.nodes().iter().enumerate() {
        let arg = |k: usize| values[node.inputs[k]];
        let set = |k: usize| match arg(k) {
            ExecValue::Set(x) => Ok(x),
            _ => Err(malformed(i, "expected an object set")),
        };
        let obj = |k: usize| match arg(k) {
            ExecValue::Object(o) => Ok(o),
            _ => Err(malformed(i, "expected an object")),
        };
        let attr = |k: usize| match arg(k) {
            ExecValue::Attr(v) => Ok(v),
            _ => Err(malformed(i, "expected an attribute value")),
        };
        let v = match node.op {
            Op::Scene => ExecValue::Set(s.all()),
            Op::FilterColor | Op::FilterSize | Op::FilterShape | Op::FilterMaterial => {
                let want = node
                    .filter_value()
                    .ok_or_else(|| malformed(i, "filter without value"))?;
                let mut out = ObjSet::EMPTY;
                for o in set(0)?.iter() {
                    if s.objects[o].has(want) {
                        out.insert(o);
                    }
                }
                ExecValue::Set(out)
            }
            Op::Unique => {
                let x = set(0)?;
                match x.sole() {
                    Some(o) => ExecValue::Object(o),
                    None => return Err(ExecError::Ambiguous { node: i, size: x.len() }),
                }
            }
            Op::Relate => {
                let r = node
                    .arg
                    .and_then(|a| a.relation())
                    .ok_or_else(|| malformed(i, "relate without relation"))?;
                ExecValue::Set(rel.get(r, obj(0)?))
            }
            Op::Count => ExecValue::Answer(Answer::Count(set(0)?.len() as u8)),
            Op::Exist => ExecValue::Answer(Answer::Bool(!set(0)?.is_empty())),
            Op::QueryColor | Op::QuerySize | Op::QueryShape | Op::QueryMaterial => {
                let ty = node.op.query_type().unwrap();
                ExecValue::Attr(s.objects[obj(0)?].attr(ty))
            }
            Op::EqualColor | Op::EqualSize | Op::EqualShape | Op::EqualMaterial => {
                let (a, b) = (attr(0)?, attr(1)?);
                let ty = node.op.equal_type().unwrap();
                if a.attr_type() != ty || b.attr_type() != ty {
                    return Err(malformed(i, "compared values of the wrong type"));
                }
                ExecValue::Answer(Answer::Bool(a == b))
            }
        };
        values.push(v);
    }
    Ok(values)
}

pub fn execute_with(p: &Program, s: &Scene, rel: &RelationMap) -> Result<Answer, ExecError> {
    match execute_trace(p, s, rel)?.pop() {
        Some(ExecValue::Answer(a)) => Ok(a),
        _ => Err(ExecError::Malformed("root does not produce an answer".into())),
    }
}

pub fn execute(p: &Program, s: &Scene) -> Result<Answer, Error> {
    let rel = derive_relations(s)?;
    Ok(execute_with(p, s, &rel)?)
}
