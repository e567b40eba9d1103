//! Naive reference semantics, written without the interpreter's data
//! structures: object sets are `Vec<bool>` masks, relations are recomputed
//! from raw coordinates on every step, and evaluation is recursive from the
//! root. Used only to cross-check [`crate::exec::execute`].

use crate::error::Error;
use crate::exec::Answer;
use crate::program::{Arg, Op, Program};
use crate::scene::Scene;
use crate::vocab::{AttrType, AttrValue, Relation};

enum V {
    Mask(Vec<bool>),
    One(usize),
    Attr(String),
    Done(Answer),
}

fn value_of(s: &Scene, o: usize, ty: AttrType) -> String {
    let obj = &s.objects[o];
    match ty {
        AttrType::Color => obj.color.to_string(),
        AttrType::Size => obj.size.to_string(),
        AttrType::Material => obj.material.to_string(),
        AttrType::Shape => obj.shape.to_string(),
    }
}

fn stands_in(s: &Scene, i: usize, r: Relation, j: usize) -> bool {
    let (a, b) = (&s.objects[i], &s.objects[j]);
    match r {
        Relation::Left => a.x.as_f64() < b.x.as_f64(),
        Relation::Right => a.x.as_f64() > b.x.as_f64(),
        Relation::Front => a.y.as_f64() < b.y.as_f64(),
        Relation::Behind => a.y.as_f64() > b.y.as_f64(),
    }
}

fn eval(p: &Program, s: &Scene, i: usize) -> Result<V, Error> {
    let node = &p.nodes()[i];
    let n = s.objects.len();
    let bad = || Error::MalformedProgram(format!("oracle: node {i} has ill-typed input"));
    let mask = |k: usize| -> Result<Vec<bool>, Error> {
        match eval(p, s, node.inputs[k])? {
            V::Mask(m) => Ok(m),
            _ => Err(bad()),
        }
    };
    let one = |k: usize| -> Result<usize, Error> {
        match eval(p, s, node.inputs[k])? {
            V::One(o) => Ok(o),
            _ => Err(bad()),
        }
    };
    Ok(match node.op {
        Op::Scene => V::Mask(vec![true; n]),
        Op::Unique => {
            let m = mask(0)?;
            let members: Vec<usize> = (0..n).filter(|&o| m[o]).collect();
            if members.len() != 1 {
                return Err(Error::Ambiguous(format!(
                    "oracle: unique at node {i} got {} objects",
                    members.len()
                )));
            }
            V::One(members[0])
        }
        Op::Relate => {
            let Some(Arg::Rel(r)) = node.arg else { return Err(bad()) };
            let anchor = one(0)?;
            V::Mask((0..n).map(|o| o != anchor && stands_in(s, o, r, anchor)).collect())
        }
        Op::Count => {
            let m = mask(0)?;
            V::Done(Answer::Count(m.iter().filter(|&&b| b).count() as u8))
        }
        Op::Exist => V::Done(Answer::Bool(mask(0)?.into_iter().any(|b| b))),
        op => {
            if let Some(ty) = op.filter_type() {
                let Some(Arg::Value(want)) = node.arg else {
                    return Err(bad());
                };
                let want: AttrValue = want;
                let m = mask(0)?;
                V::Mask((0..n).map(|o| m[o] && value_of(s, o, ty) == want.as_str()).collect())
            } else if let Some(ty) = op.query_type() {
                V::Attr(value_of(s, one(0)?, ty))
            } else if op.equal_type().is_some() {
                let get = |k: usize| match eval(p, s, node.inputs[k])? {
                    V::Attr(a) => Ok(a),
                    _ => Err(bad()),
                };
                V::Done(Answer::Bool(get(0)? == get(1)?))
            } else {
                return Err(bad());
            }
        }
    })
}

/// Reference answer for `p` on `s`, by direct set comprehension.
pub fn oracle_execute(p: &Program, s: &Scene) -> Result<Answer, Error> {
    match eval(p, s, p.root())? {
        V::Done(a) => Ok(a),
        _ => Err(Error::MalformedProgram("oracle: root is not an answer".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{ChainBuilder, ProgramNode};
    use crate::scene::{Condition, Coord, ObjectSpec};
    use crate::vocab::{Color, Material, Shape, Size};

    fn scene() -> Scene {
        let o = |color, size, x: f64, y: f64| ObjectSpec {
            color,
            size,
            shape: Shape::Sphere,
            material: Material::Rubber,
            x: Coord::from_f64(x),
            y: Coord::from_f64(y),
        };
        Scene {
            id: "s".into(),
            condition: Condition::A,
            objects: vec![
                o(Color::Gray, Size::Small, 0.0, 0.0),
                o(Color::Red, Size::Small, 1.0, 1.0),
                o(Color::Blue, Size::Large, 2.0, -1.0),
            ],
        }
    }

    fn compare_sizes(a: Color, b: Color) -> Program {
        let mut p = ChainBuilder::new();
        let lhs = p.filters(0, &[AttrValue::Color(a)]);
        let lhs = p.push(ProgramNode::unary(Op::Unique, lhs));
        let lhs = p.push(ProgramNode::unary(Op::QuerySize, lhs));
        let rhs = p.filters(0, &[AttrValue::Color(b)]);
        let rhs = p.push(ProgramNode::unary(Op::Unique, rhs));
        let rhs = p.push(ProgramNode::unary(Op::QuerySize, rhs));
        p.push(ProgramNode::binary(Op::EqualSize, lhs, rhs));
        p.finish().unwrap()
    }

    #[test]
    fn empty_filter_count_is_zero() {
        let mut b = ChainBuilder::new();
        let at = b.filters(0, &[AttrValue::Color(Color::Purple)]);
        b.push(ProgramNode::unary(Op::Count, at));
        assert_eq!(
            oracle_execute(&b.finish().unwrap(), &scene()).unwrap(),
            Answer::Count(0)
        );
    }

    #[test]
    fn equal_size_of_two_small_objects() {
        let s = scene();
        assert_eq!(
            oracle_execute(&compare_sizes(Color::Gray, Color::Red), &s).unwrap(),
            Answer::Bool(true)
        );
        assert_eq!(
            oracle_execute(&compare_sizes(Color::Gray, Color::Blue), &s).unwrap(),
            Answer::Bool(false)
        );
    }

    #[test]
    fn ambiguous_unique() {
        let mut b = ChainBuilder::new();
        let at = b.filters(0, &[AttrValue::Size(Size::Small)]);
        let at = b.push(ProgramNode::unary(Op::Unique, at));
        let at = b.push(ProgramNode::relate(Relation::Left, at));
        b.push(ProgramNode::unary(Op::Exist, at));
        let err = oracle_execute(&b.finish().unwrap(), &scene()).unwrap_err();
        assert!(matches!(err, Error::Ambiguous(_)));
    }
}
