//! Binding templates to scenes under a bias spec.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bias::{check_conformance, BiasSpec, Draw, FamilySpec};
use crate::dataset::QuestionRecord;
use crate::error::{Error, Result};
use crate::exec::{execute_trace, ExecValue};
use crate::program::Program;
use crate::question::render::{render_text, Binding};
use crate::question::synonyms::SynonymTable;
use crate::question::template::Template;
use crate::scene::{derive_relations, ObjSet, RelationMap, Scene};
use crate::seed::SeedPath;
use crate::signature::Family;
use crate::vocab::{AttrType, AttrValue, Relation};

/// Binding attempts per (template, scene) before giving up.
pub const BIND_ATTEMPTS: usize = 24;

/// Draws `k` items from `pool` under `draw`, in random order.
pub fn draw_multiset<T: Copy + Ord, R: Rng>(pool: &[T], k: usize, draw: Draw, rng: &mut R) -> Vec<T> {
    let mut out: Vec<T> = match draw {
        Draw::Free => (0..k).map(|_| *pool.choose(rng).unwrap()).collect(),
        Draw::Spread if k >= pool.len() => {
            let mut v = pool.to_vec();
            v.extend((pool.len()..k).map(|_| *pool.choose(rng).unwrap()));
            v
        }
        Draw::Spread => pool.choose_multiple(rng, k).copied().collect(),
    };
    out.shuffle(rng);
    out
}

fn filter_set(s: &Scene, input: ObjSet, values: &[AttrValue]) -> ObjSet {
    let mut out = ObjSet::EMPTY;
    for o in input.iter() {
        if values.iter().all(|&v| s.objects[o].has(v)) {
            out.insert(o);
        }
    }
    out
}

/// True if every filter changes the result: dropping any one of `values`
/// yields a different set than applying all of them.
fn filters_essential(s: &Scene, input: ObjSet, values: &[AttrValue], result: ObjSet) -> bool {
    (0..values.len()).all(|skip| {
        let rest: Vec<AttrValue> = values
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &v)| v)
            .collect();
        filter_set(s, input, &rest) != result
    })
}

/// Checks that every `unique` resolves to one object and that every filter
/// run has no redundant filter, by re-executing the program.
pub fn check_non_degenerate(p: &Program, s: &Scene, rel: &RelationMap) -> std::result::Result<(), String> {
    let trace = execute_trace(p, s, rel).map_err(|e| e.to_string())?;
    let nodes = p.nodes();
    for (i, node) in nodes.iter().enumerate() {
        if node.op.filter_type().is_some() {
            continue;
        }
        for &j in &node.inputs {
            let mut values = Vec::new();
            let mut base = j;
            while let Some(v) = nodes[base].filter_value() {
                values.push(v);
                base = nodes[base].inputs[0];
            }
            if values.is_empty() {
                continue;
            }
            let (ExecValue::Set(input), ExecValue::Set(result)) = (trace[base], trace[j]) else {
                return Err(format!("node {j}: filter run over a non-set"));
            };
            if !filters_essential(s, input, &values, result) {
                return Err(format!("node {i}: a filter in the run ending at node {j} is redundant"));
            }
        }
    }
    Ok(())
}

/// Splits `attrs` across objects per the template's slot counts, with no
/// object getting two values of one type.
fn assign_slots<R: Rng>(t: &Template, attrs: &[AttrType], rng: &mut R) -> Option<Vec<Vec<AttrType>>> {
    for _ in 0..8 {
        let mut shuffled = attrs.to_vec();
        shuffled.shuffle(rng);
        let mut out = Vec::with_capacity(t.objects());
        let mut rest = shuffled.as_slice();
        for &n in &t.attr_slots_per_object {
            let (head, tail) = rest.split_at(n);
            let mut types = head.to_vec();
            types.sort();
            out.push(types);
            rest = tail;
        }
        if out.iter().all(|types| types.windows(2).all(|w| w[0] != w[1])) {
            return Some(out);
        }
    }
    None
}

fn values_of(s: &Scene, o: usize, types: &[AttrType]) -> Vec<AttrValue> {
    types.iter().map(|&ty| s.objects[o].attr(ty)).collect()
}

/// Every assignment of one value to each of `types`.
fn value_combos(types: &[AttrType]) -> Vec<Vec<AttrValue>> {
    let mut acc = vec![Vec::new()];
    for ty in types {
        let mut next = Vec::new();
        for prefix in &acc {
            for v in ty.values() {
                let mut combo = prefix.clone();
                combo.push(v);
                next.push(combo);
            }
        }
        acc = next;
    }
    acc
}

/// Binds a Count/Exist chain: referents from the deepest outward, each
/// described by its own attribute values and required to be the only match
/// with every filter essential.
fn bind_chain<R: Rng>(
    s: &Scene,
    rel: &RelationMap,
    types: &[Vec<AttrType>],
    relations: &[Relation],
    rng: &mut R,
) -> Option<Binding> {
    let hop = relations.len();
    let mut objects: Vec<Vec<AttrValue>> = vec![Vec::new(); hop + 1];
    let mut candidates = s.all();
    for i in (1..=hop).rev() {
        let mut order: Vec<usize> = candidates.iter().collect();
        order.shuffle(rng);
        let chosen = order.into_iter().find_map(|o| {
            let values = values_of(s, o, &types[i]);
            let hit = filter_set(s, candidates, &values);
            (hit == ObjSet::single(o) && filters_essential(s, candidates, &values, hit)).then_some((o, values))
        })?;
        objects[i] = chosen.1;
        candidates = rel.get(relations[i - 1], chosen.0);
    }
    // Target: any value combination whose filters all matter; half the
    // time only those that match something.
    let valid: Vec<Vec<AttrValue>> = value_combos(&types[0])
        .into_iter()
        .filter(|v| filters_essential(s, candidates, v, filter_set(s, candidates, v)))
        .collect();
    let matching: Vec<&Vec<AttrValue>> = valid
        .iter()
        .filter(|v| !filter_set(s, candidates, v).is_empty())
        .collect();
    let target = if !matching.is_empty() && rng.gen_bool(0.5) {
        (*matching.choose(rng).unwrap()).clone()
    } else {
        valid.choose(rng)?.clone()
    };
    objects[0] = target;
    Some(Binding {
        objects,
        relations: relations.to_vec(),
    })
}

/// Two distinct objects, each the only one with its value of the filter
/// attribute `attr`.
fn bind_comparison<R: Rng>(s: &Scene, attr: AttrType, rng: &mut R) -> Option<Binding> {
    let singles: Vec<usize> = (0..s.len())
        .filter(|&o| {
            let v = s.objects[o].attr(attr);
            s.objects.iter().filter(|p| p.has(v)).count() == 1
        })
        .collect();
    if singles.len() < 2 {
        return None;
    }
    let pair: Vec<usize> = singles.choose_multiple(rng, 2).copied().collect();
    Some(Binding {
        objects: pair.iter().map(|&o| vec![s.objects[o].attr(attr)]).collect(),
        relations: vec![],
    })
}

/// Checks that `t` can produce questions allowed by `spec`.
pub fn template_fits(t: &Template, spec: &FamilySpec) -> bool {
    let [lo, hi] = spec.attrs_per_question;
    let k = t.total_attrs();
    k >= lo
        && k <= hi
        && spec.hops.contains(&t.hop)
        && t.max_slots() <= spec.max_attrs_per_object
        && match &spec.combos {
            Some(combos) => combos.iter().any(|c| c.attrs.len() == k),
            None => true,
        }
}

/// Instantiates one question of template `t` on scene `s`.
pub fn instantiate(
    t: &Template,
    s: &Scene,
    b: &BiasSpec,
    syn: &SynonymTable,
    seed: &SeedPath,
    id: &str,
) -> Result<QuestionRecord> {
    let spec = b
        .families
        .get(&t.family)
        .ok_or_else(|| Error::Input(format!("{} does not allow {}", b.name, t.family)))?;
    if !template_fits(t, spec) {
        return Err(Error::Input(format!("template {} is outside {}", t.id, b.name)));
    }
    let rel = derive_relations(s)?;
    instantiate_with(t, s, &rel, b, syn, seed, id)
}

/// [`instantiate`] with the scene's relations already derived.
pub fn instantiate_with(
    t: &Template,
    s: &Scene,
    rel: &RelationMap,
    b: &BiasSpec,
    syn: &SynonymTable,
    seed: &SeedPath,
    id: &str,
) -> Result<QuestionRecord> {
    let spec = b
        .families
        .get(&t.family)
        .ok_or_else(|| Error::Input(format!("{} does not allow {}", b.name, t.family)))?;
    let mut rng = seed.derive("bind", 0).rng();
    let attr_pool: Vec<AttrType> = spec.attr_pool.iter().copied().collect();
    let rel_pool: Vec<Relation> = spec.rel_pool.iter().copied().collect();
    let k = t.total_attrs();

    for _ in 0..BIND_ATTEMPTS {
        let (attrs, relations) = match (&spec.combos, t.family.compared_attr()) {
            (_, Some(_)) => (vec![spec.comparison_filter_attr.expect("validated"); 2], vec![]),
            (Some(combos), None) => {
                let fitting: Vec<_> = combos.iter().filter(|c| c.attrs.len() == k).collect();
                let combo = fitting.choose(&mut rng).expect("template_fits checked");
                let pool: Vec<Relation> = combo.rels.distinct().into_iter().collect();
                (
                    combo.attrs.items().to_vec(),
                    draw_multiset(&pool, t.hop, Draw::Spread, &mut rng),
                )
            }
            (None, None) => (
                draw_multiset(&attr_pool, k, spec.attr_draw, &mut rng),
                draw_multiset(&rel_pool, t.hop, spec.rel_draw, &mut rng),
            ),
        };
        let binding = match t.family {
            Family::Count | Family::Exist => {
                let Some(types) = assign_slots(t, &attrs, &mut rng) else {
                    continue;
                };
                bind_chain(s, rel, &types, &relations, &mut rng)
            }
            _ => bind_comparison(s, attrs[0], &mut rng),
        };
        let Some(binding) = binding else { continue };
        let program = t.bind(&binding)?.canonicalize();
        if check_non_degenerate(&program, s, rel).is_err() {
            continue;
        }
        let answer = crate::exec::execute_with(&program, s, rel)?;
        let text = render_text(&program, t, syn, &seed.derive("render", 0))?;
        let record = QuestionRecord::new(id.to_owned(), s.id.clone(), text, program, answer, b.name.clone());
        if let Err(v) = check_conformance(&record, b) {
            return Err(Error::Input(format!(
                "template {} produced a non-conformant question: {:?}",
                t.id, v.reasons
            )));
        }
        return Ok(record);
    }
    Err(Error::Unsatisfiable(format!(
        "template {} found no valid binding on scene {} in {BIND_ATTEMPTS} attempts",
        t.id, s.id
    )))
}

/// A bound program for `t` with arbitrary values and relations. It may be
/// degenerate or ambiguous on a given scene.
pub fn random_program<R: Rng>(t: &Template, rng: &mut R) -> Program {
    let objects = t
        .attr_slots_per_object
        .iter()
        .map(|&n| {
            let mut types: Vec<AttrType> = AttrType::ALL.choose_multiple(rng, n).copied().collect();
            types.sort();
            types.into_iter().map(|ty| *ty.values().choose(rng).unwrap()).collect()
        })
        .collect();
    let relations = (0..t.hop).map(|_| *Relation::ALL.choose(rng).unwrap()).collect();
    t.bind(&Binding { objects, relations })
        .expect("template accepts its own shape")
}
