//! The functional-program DSL: node vocabulary, validation, JSON encoding,
//! hop counting, signatures and canonical form.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::signature::{CompositionSignature, Family};
use crate::vocab::{AttrType, AttrValue, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    Scene,
    FilterColor,
    FilterSize,
    FilterShape,
    FilterMaterial,
    Unique,
    Relate,
    Count,
    Exist,
    QueryColor,
    QuerySize,
    QueryShape,
    QueryMaterial,
    EqualColor,
    EqualSize,
    EqualShape,
    EqualMaterial,
}

impl Op {
    pub fn filter(ty: AttrType) -> Op {
        match ty {
            AttrType::Color => Op::FilterColor,
            AttrType::Size => Op::FilterSize,
            AttrType::Shape => Op::FilterShape,
            AttrType::Material => Op::FilterMaterial,
        }
    }

    pub fn query(ty: AttrType) -> Op {
        match ty {
            AttrType::Color => Op::QueryColor,
            AttrType::Size => Op::QuerySize,
            AttrType::Shape => Op::QueryShape,
            AttrType::Material => Op::QueryMaterial,
        }
    }

    pub fn equal(ty: AttrType) -> Op {
        match ty {
            AttrType::Color => Op::EqualColor,
            AttrType::Size => Op::EqualSize,
            AttrType::Shape => Op::EqualShape,
            AttrType::Material => Op::EqualMaterial,
        }
    }

    pub fn filter_type(self) -> Option<AttrType> {
        match self {
            Op::FilterColor => Some(AttrType::Color),
            Op::FilterSize => Some(AttrType::Size),
            Op::FilterShape => Some(AttrType::Shape),
            Op::FilterMaterial => Some(AttrType::Material),
            _ => None,
        }
    }

    pub fn query_type(self) -> Option<AttrType> {
        match self {
            Op::QueryColor => Some(AttrType::Color),
            Op::QuerySize => Some(AttrType::Size),
            Op::QueryShape => Some(AttrType::Shape),
            Op::QueryMaterial => Some(AttrType::Material),
            _ => None,
        }
    }

    pub fn equal_type(self) -> Option<AttrType> {
        match self {
            Op::EqualColor => Some(AttrType::Color),
            Op::EqualSize => Some(AttrType::Size),
            Op::EqualShape => Some(AttrType::Shape),
            Op::EqualMaterial => Some(AttrType::Material),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Scene => 0,
            _ if self.equal_type().is_some() => 2,
            _ => 1,
        }
    }

    pub fn takes_arg(self) -> bool {
        self == Op::Relate || self.filter_type().is_some()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Scene => "scene",
            Op::FilterColor => "filter_color",
            Op::FilterSize => "filter_size",
            Op::FilterShape => "filter_shape",
            Op::FilterMaterial => "filter_material",
            Op::Unique => "unique",
            Op::Relate => "relate",
            Op::Count => "count",
            Op::Exist => "exist",
            Op::QueryColor => "query_color",
            Op::QuerySize => "query_size",
            Op::QueryShape => "query_shape",
            Op::QueryMaterial => "query_material",
            Op::EqualColor => "equal_color",
            Op::EqualSize => "equal_size",
            Op::EqualShape => "equal_shape",
            Op::EqualMaterial => "equal_material",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Arg {
    Value(AttrValue),
    Rel(Relation),
}

impl Arg {
    pub fn as_str(self) -> &'static str {
        match self {
            Arg::Value(v) => v.as_str(),
            Arg::Rel(r) => r.as_str(),
        }
    }

    pub fn value(self) -> Option<AttrValue> {
        match self {
            Arg::Value(v) => Some(v),
            Arg::Rel(_) => None,
        }
    }

    pub fn relation(self) -> Option<Relation> {
        match self {
            Arg::Rel(r) => Some(r),
            Arg::Value(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProgramNode {
    pub op: Op,
    pub arg: Option<Arg>,
    pub inputs: Vec<usize>,
}

impl ProgramNode {
    pub fn scene() -> Self {
        ProgramNode {
            op: Op::Scene,
            arg: None,
            inputs: vec![],
        }
    }

    pub fn filter(v: AttrValue, input: usize) -> Self {
        ProgramNode {
            op: Op::filter(v.attr_type()),
            arg: Some(Arg::Value(v)),
            inputs: vec![input],
        }
    }

    pub fn relate(r: Relation, input: usize) -> Self {
        ProgramNode {
            op: Op::Relate,
            arg: Some(Arg::Rel(r)),
            inputs: vec![input],
        }
    }

    pub fn unary(op: Op, input: usize) -> Self {
        ProgramNode {
            op,
            arg: None,
            inputs: vec![input],
        }
    }

    pub fn binary(op: Op, a: usize, b: usize) -> Self {
        ProgramNode {
            op,
            arg: None,
            inputs: vec![a, b],
        }
    }

    pub fn filter_value(&self) -> Option<AttrValue> {
        self.op.filter_type()?;
        self.arg.and_then(Arg::value)
    }
}

/// Static type of a node's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueType {
    Set,
    Object,
    Attr(AttrType),
    Answer,
}

/// A validated program: nodes in topological order, root last.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    nodes: Vec<ProgramNode>,
    root: usize,
}

impl Program {
    pub fn new(nodes: Vec<ProgramNode>) -> Result<Program> {
        let root = nodes
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::MalformedProgram("empty program".into()))?;
        let p = Program { nodes, root };
        p.type_check()?;
        Ok(p)
    }

    pub fn nodes(&self) -> &[ProgramNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn root_op(&self) -> Op {
        self.nodes[self.root].op
    }

    pub fn family(&self) -> Family {
        match self.root_op() {
            Op::Count => Family::Count,
            Op::Exist => Family::Exist,
            op => Family::equal_for(op.equal_type().expect("validated root")),
        }
    }

    /// Number of semantic operations: nodes other than `scene`.
    pub fn op_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.op != Op::Scene).count()
    }

    pub fn filters(&self) -> impl Iterator<Item = AttrValue> + '_ {
        self.nodes.iter().filter_map(ProgramNode::filter_value)
    }

    pub fn relations(&self) -> impl Iterator<Item = Relation> + '_ {
        self.nodes
            .iter()
            .filter(|n| n.op == Op::Relate)
            .filter_map(|n| n.arg.and_then(Arg::relation))
    }

    /// Output type of every node; fails on any arity, argument, typing or
    /// shape violation.
    pub fn type_check(&self) -> Result<Vec<ValueType>> {
        let bad = |i: usize, msg: String| Error::MalformedProgram(format!("node {i}: {msg}"));
        let mut types: Vec<ValueType> = Vec::with_capacity(self.nodes.len());
        let mut consumers = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if node.inputs.len() != node.op.arity() {
                return Err(bad(
                    i,
                    format!(
                        "{} takes {} inputs, got {}",
                        node.op,
                        node.op.arity(),
                        node.inputs.len()
                    ),
                ));
            }
            for &j in &node.inputs {
                if j >= i {
                    return Err(bad(i, format!("input {j} is not an earlier node")));
                }
                consumers[j] += 1;
            }
            match (node.op.takes_arg(), node.arg) {
                (true, None) => return Err(bad(i, format!("{} needs an argument", node.op))),
                (false, Some(_)) => return Err(bad(i, format!("{} takes no argument", node.op))),
                _ => {}
            }
            let input = |k: usize| types[node.inputs[k]];
            let expect = |k: usize, want: ValueType| -> Result<()> {
                let got = input(k);
                if got == want {
                    Ok(())
                } else {
                    Err(bad(i, format!("{} expects {want:?} input, got {got:?}", node.op)))
                }
            };
            let out = match node.op {
                Op::Scene => ValueType::Set,
                Op::FilterColor | Op::FilterSize | Op::FilterShape | Op::FilterMaterial => {
                    let ty = node.op.filter_type().unwrap();
                    match node.arg {
                        Some(Arg::Value(v)) if v.attr_type() == ty => {}
                        _ => return Err(bad(i, format!("{} needs a {ty} value", node.op))),
                    }
                    expect(0, ValueType::Set)?;
                    ValueType::Set
                }
                Op::Relate => {
                    if !matches!(node.arg, Some(Arg::Rel(_))) {
                        return Err(bad(i, "relate needs a relation".into()));
                    }
                    expect(0, ValueType::Object)?;
                    ValueType::Set
                }
                Op::Unique => {
                    expect(0, ValueType::Set)?;
                    ValueType::Object
                }
                Op::Count | Op::Exist => {
                    expect(0, ValueType::Set)?;
                    ValueType::Answer
                }
                Op::QueryColor | Op::QuerySize | Op::QueryShape | Op::QueryMaterial => {
                    expect(0, ValueType::Object)?;
                    ValueType::Attr(node.op.query_type().unwrap())
                }
                Op::EqualColor | Op::EqualSize | Op::EqualShape | Op::EqualMaterial => {
                    let ty = ValueType::Attr(node.op.equal_type().unwrap());
                    expect(0, ty)?;
                    expect(1, ty)?;
                    ValueType::Answer
                }
            };
            types.push(out);
        }
        let root = self.root;
        if root + 1 != self.nodes.len() {
            return Err(bad(root, "root must be the last node".into()));
        }
        if !matches!(self.nodes[root].op, Op::Count | Op::Exist) && self.nodes[root].op.equal_type().is_none() {
            return Err(bad(root, format!("{} cannot be a root", self.nodes[root].op)));
        }
        if let Some(i) = (0..root).find(|&i| consumers[i] == 0) {
            return Err(bad(i, "node is not used by the root".into()));
        }
        if types[..root].contains(&ValueType::Answer) {
            return Err(bad(root, "answers can only be produced at the root".into()));
        }
        Ok(types)
    }

    /// Filter runs sorted by (Size, Color, Material, Shape) and the node list
    /// rebuilt in depth-first input order around a single `scene` node.
    pub fn canonicalize(&self) -> Program {
        let mut out = vec![ProgramNode::scene()];
        let mut memo: HashMap<usize, usize> = HashMap::new();
        self.emit(self.root, &mut out, &mut memo);
        Program {
            root: out.len() - 1,
            nodes: out,
        }
    }

    fn emit(&self, i: usize, out: &mut Vec<ProgramNode>, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(&j) = memo.get(&i) {
            return j;
        }
        let node = &self.nodes[i];
        let new = match node.op {
            Op::Scene => 0,
            op if op.filter_type().is_some() => {
                let mut run = Vec::new();
                let mut cur = i;
                while let Some(v) = self.nodes[cur].filter_value() {
                    run.push(v);
                    cur = self.nodes[cur].inputs[0];
                }
                run.sort();
                let mut at = self.emit(cur, out, memo);
                for v in run {
                    out.push(ProgramNode::filter(v, at));
                    at = out.len() - 1;
                }
                at
            }
            _ => {
                let inputs = node.inputs.iter().map(|&j| self.emit(j, out, memo)).collect();
                out.push(ProgramNode {
                    op: node.op,
                    arg: node.arg,
                    inputs,
                });
                out.len() - 1
            }
        };
        memo.insert(i, new);
        new
    }
}

impl Program {
    /// Maximal runs of consecutive filter nodes, each listed from the node
    /// nearest its source outward. In generated programs a run is the
    /// attribute list of one object reference.
    pub fn filter_runs(&self) -> Vec<Vec<AttrValue>> {
        let mut runs = Vec::new();
        for node in &self.nodes {
            if node.op.filter_type().is_some() {
                continue;
            }
            for &j in &node.inputs {
                let mut run = Vec::new();
                let mut cur = j;
                while let Some(v) = self.nodes[cur].filter_value() {
                    run.push(v);
                    cur = self.nodes[cur].inputs[0];
                }
                if !run.is_empty() {
                    run.reverse();
                    runs.push(run);
                }
            }
        }
        runs
    }
}

/// Number of spatial-relation steps.
pub fn hop_count(p: &Program) -> usize {
    p.nodes.iter().filter(|n| n.op == Op::Relate).count()
}

/// Family from the root, attribute types from every filter, relations from
/// every relate.
pub fn signature_of(p: &Program) -> CompositionSignature {
    CompositionSignature::new(
        p.family(),
        p.filters().map(AttrValue::attr_type).collect(),
        p.relations().collect(),
    )
}

pub fn canonicalize(p: &Program) -> Program {
    p.canonicalize()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeJson {
    op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arg: Option<String>,
    #[serde(rename = "in", default, skip_serializing_if = "Vec::is_empty")]
    inputs: Vec<usize>,
}

impl Serialize for Program {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nodes: Vec<NodeJson> = self
            .nodes
            .iter()
            .map(|n| NodeJson {
                op: n.op,
                arg: n.arg.map(|a| a.as_str().to_owned()),
                inputs: n.inputs.clone(),
            })
            .collect();
        nodes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Program {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = Vec::<NodeJson>::deserialize(d)?;
        let mut nodes = Vec::with_capacity(raw.len());
        for (i, n) in raw.into_iter().enumerate() {
            let arg = match (&n.arg, n.op) {
                (None, _) => None,
                (Some(a), Op::Relate) => Some(Arg::Rel(a.parse().map_err(D::Error::custom)?)),
                (Some(a), op) => match op.filter_type() {
                    Some(ty) => Some(Arg::Value(AttrValue::parse_typed(ty, a).map_err(D::Error::custom)?)),
                    None => return Err(D::Error::custom(format!("node {i}: {op} takes no argument"))),
                },
            };
            nodes.push(ProgramNode {
                op: n.op,
                arg,
                inputs: n.inputs,
            });
        }
        Program::new(nodes).map_err(D::Error::custom)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, n) in self.nodes.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{i}:{}", n.op)?;
            if let Some(a) = n.arg {
                write!(f, "[{}]", a.as_str())?;
            }
            if !n.inputs.is_empty() {
                let ins: Vec<String> = n.inputs.iter().map(|j| j.to_string()).collect();
                write!(f, "({})", ins.join(","))?;
            }
        }
        Ok(())
    }
}

/// Incremental builder for the chain-shaped programs the generator emits.
#[derive(Debug, Default)]
pub struct ChainBuilder {
    nodes: Vec<ProgramNode>,
}

impl ChainBuilder {
    pub fn new() -> Self {
        ChainBuilder {
            nodes: vec![ProgramNode::scene()],
        }
    }

    pub fn scene_index(&self) -> usize {
        0
    }

    pub fn push(&mut self, node: ProgramNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub fn filters(&mut self, mut at: usize, values: &[AttrValue]) -> usize {
        for &v in values {
            at = self.push(ProgramNode::filter(v, at));
        }
        at
    }

    pub fn finish(self) -> Result<Program> {
        Program::new(self.nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{Color, Material, Shape, Size};

    fn red() -> AttrValue {
        AttrValue::Color(Color::Red)
    }
    fn large() -> AttrValue {
        AttrValue::Size(Size::Large)
    }

    fn count_of(values: &[AttrValue]) -> Program {
        let mut b = ChainBuilder::new();
        let at = b.filters(0, values);
        b.push(ProgramNode::unary(Op::Count, at));
        b.finish().unwrap()
    }

    #[test]
    fn zero_hop_exist() {
        let mut b = ChainBuilder::new();
        let at = b.filters(0, &[AttrValue::Material(Material::Metal)]);
        b.push(ProgramNode::unary(Op::Exist, at));
        let p = b.finish().unwrap();
        assert_eq!(hop_count(&p), 0);
    }

    #[test]
    fn three_relates() {
        let mut b = ChainBuilder::new();
        let mut at = b.filters(0, &[red()]);
        for r in [Relation::Left, Relation::Front, Relation::Left] {
            at = b.push(ProgramNode::unary(Op::Unique, at));
            at = b.push(ProgramNode::relate(r, at));
        }
        b.push(ProgramNode::unary(Op::Count, at));
        let p = b.finish().unwrap();
        assert_eq!(hop_count(&p), 3);
        assert_eq!(signature_of(&p).rels.len(), 3);
    }

    #[test]
    fn count_signature() {
        let p = count_of(&[red(), large()]);
        assert_eq!(
            signature_of(&p),
            CompositionSignature::new(Family::Count, vec![AttrType::Color, AttrType::Size], vec![])
        );
    }

    #[test]
    fn exist_two_hop_signature() {
        let mut b = ChainBuilder::new();
        let mut at = b.filters(0, &[AttrValue::Shape(Shape::Cube)]);
        at = b.push(ProgramNode::unary(Op::Unique, at));
        at = b.push(ProgramNode::relate(Relation::Behind, at));
        at = b.push(ProgramNode::unary(Op::Unique, at));
        at = b.push(ProgramNode::relate(Relation::Right, at));
        at = b.filters(at, &[AttrValue::Material(Material::Rubber)]);
        b.push(ProgramNode::unary(Op::Exist, at));
        let p = b.finish().unwrap();
        assert_eq!(
            signature_of(&p),
            CompositionSignature::new(
                Family::Exist,
                vec![AttrType::Material, AttrType::Shape],
                vec![Relation::Right, Relation::Behind]
            )
        );
    }

    #[test]
    fn equal_size_signature() {
        let mut b = ChainBuilder::new();
        let a = b.filters(0, &[AttrValue::Material(Material::Rubber)]);
        let a = b.push(ProgramNode::unary(Op::Unique, a));
        let a = b.push(ProgramNode::unary(Op::QuerySize, a));
        let c = b.filters(0, &[AttrValue::Material(Material::Metal)]);
        let c = b.push(ProgramNode::unary(Op::Unique, c));
        let c = b.push(ProgramNode::unary(Op::QuerySize, c));
        b.push(ProgramNode::binary(Op::EqualSize, a, c));
        let p = b.finish().unwrap();
        assert_eq!(
            signature_of(&p),
            CompositionSignature::new(Family::EqualSize, vec![AttrType::Material; 2], vec![])
        );
        assert_eq!(p.canonicalize(), p);
    }

    #[test]
    fn canonical_filter_order() {
        let p = count_of(&[red(), large()]);
        let c = p.canonicalize();
        assert_eq!(c, count_of(&[large(), red()]));
        assert_eq!(c.canonicalize(), c);
        assert_eq!(signature_of(&c), signature_of(&p));
    }

    #[test]
    fn json_encoding() {
        let p = count_of(&[large(), red()]);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"[{"op":"scene"},{"op":"filter_size","arg":"large","in":[0]},{"op":"filter_color","arg":"red","in":[1]},{"op":"count","in":[2]}]"#
        );
        assert_eq!(serde_json::from_str::<Program>(&s).unwrap(), p);
    }

    #[test]
    fn malformed_programs_rejected() {
        let cases = [
            r#"[{"op":"scene"},{"op":"frobnicate","in":[0]}]"#,
            r#"[{"op":"scene"},{"op":"filter_color","arg":"large","in":[0]},{"op":"count","in":[1]}]"#,
            r#"[{"op":"scene"},{"op":"relate","arg":"left","in":[0]},{"op":"count","in":[1]}]"#,
            r#"[{"op":"scene"},{"op":"unique","in":[0]}]"#,
            r#"[{"op":"scene"},{"op":"count","in":[0]},{"op":"count","in":[0]}]"#,
            r#"[{"op":"scene"},{"op":"count","in":[2]}]"#,
            r#"[{"op":"scene"},{"op":"count","arg":"red","in":[0]}]"#,
            r#"[]"#,
        ];
        for c in cases {
            assert!(serde_json::from_str::<Program>(c).is_err(), "{c}");
        }
    }
}
