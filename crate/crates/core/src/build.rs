//! Generating named sets: scene pools, template choice and answer balancing.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bias::BiasSpec;
use crate::dataset::{Dataset, QuestionRecord};
use crate::error::{Error, Result};
use crate::exec::Answer;
use crate::program::Program;
use crate::question::{all_templates, instantiate_with, template_fits, SynonymTable, Template};
use crate::registry::{NamedSet, ScenePool};
use crate::scene::{derive_relations, sample_scene, Scene};
use crate::seed::SeedPath;
use crate::signature::Family;

/// Questions attempted per scene.
pub const QUESTIONS_PER_SCENE: usize = 10;
/// Instantiation attempts per question slot.
pub const TRIES_PER_SLOT: usize = 4;
/// Scenes generated per question slot of budget, as a ceiling.
const SCENE_HEADROOM: usize = 4;

/// Scene `idx` of a pool. Pools depend only on (master, pool), so sets that
/// share a pool see the same scenes.
pub fn pool_scene(pool: &ScenePool, idx: u64, master: &SeedPath) -> Result<Scene> {
    let label = pool.label();
    let id = format!("{label}_{idx:07}");
    sample_scene(&pool.config(), &id, &master.derive("scenes", 0).derive(&label, idx))
}

pub fn scene_pool(pool: &ScenePool, n: usize, master: &SeedPath) -> Result<Vec<Scene>> {
    (0..n as u64).map(|i| pool_scene(pool, i, master)).collect()
}

/// Maximum share of one answer within a family, with a small warm-up slack.
fn answer_cap(family: Family) -> f64 {
    if family.is_boolean() {
        0.6
    } else {
        0.4
    }
}
const BALANCE_SLACK: f64 = 8.0;

#[derive(Default)]
struct Balance {
    per_family: BTreeMap<Family, (usize, BTreeMap<Answer, usize>)>,
}

impl Balance {
    fn accepts(&self, f: Family, a: Answer) -> bool {
        let Some((total, counts)) = self.per_family.get(&f) else {
            return true;
        };
        let seen = counts.get(&a).copied().unwrap_or(0);
        (seen + 1) as f64 <= answer_cap(f) * (*total + 1) as f64 + BALANCE_SLACK
    }

    fn emitted(&self, f: Family) -> usize {
        self.per_family.get(&f).map_or(0, |(total, _)| *total)
    }

    fn add(&mut self, f: Family, a: Answer) {
        let (total, counts) = self.per_family.entry(f).or_default();
        *total += 1;
        *counts.entry(a).or_default() += 1;
    }
}

/// Templates usable per family, grouped by (hop, attribute count).
struct Menu {
    families: Vec<Family>,
    groups: BTreeMap<Family, Vec<Vec<Template>>>,
}

impl Menu {
    fn new(spec: &BiasSpec) -> Result<Self> {
        let templates = all_templates();
        let mut groups = BTreeMap::new();
        for (&family, fs) in &spec.families {
            let mut by_shape: BTreeMap<(usize, usize), Vec<Template>> = BTreeMap::new();
            for t in templates.iter().filter(|t| t.family == family && template_fits(t, fs)) {
                by_shape.entry((t.hop, t.total_attrs())).or_default().push(t.clone());
            }
            if by_shape.is_empty() {
                return Err(Error::Unsatisfiable(format!(
                    "{}: no template fits {family}",
                    spec.name
                )));
            }
            groups.insert(family, by_shape.into_values().collect());
        }
        Ok(Menu {
            families: spec.families.keys().copied().collect(),
            groups,
        })
    }

    fn pick<R: Rng>(&self, family: Family, rng: &mut R) -> &Template {
        let group = self.groups[&family].choose(rng).unwrap();
        group.choose(rng).unwrap()
    }
}

/// Builds `budget` conformant questions for `set` from `scenes`, in order.
pub fn build_named_set(set: &NamedSet, scenes: &[Scene], budget: usize, seed: &SeedPath) -> Result<Dataset> {
    build(set, scenes.iter().cloned().map(Ok), budget, seed).map(|(_, q)| q)
}

/// Builds a set together with the prefix of its pool that it consumed.
pub fn generate_set(set: &NamedSet, budget: usize, master: &SeedPath) -> Result<(Vec<Scene>, Dataset)> {
    let max_scenes = (budget.max(1) * SCENE_HEADROOM) as u64;
    let scenes = (0..max_scenes).map(|i| pool_scene(&set.scenes, i, master));
    build(set, scenes, budget, master)
}

fn build(
    set: &NamedSet,
    scenes: impl Iterator<Item = Result<Scene>>,
    budget: usize,
    seed: &SeedPath,
) -> Result<(Vec<Scene>, Dataset)> {
    let spec = &set.spec;
    let menu = Menu::new(spec)?;
    let syn = SynonymTable::default();
    let seed = seed.derive("questions", 0).derive(&spec.name, 0);
    let mut balance = Balance::default();
    let mut used = Vec::new();
    let mut out: Vec<QuestionRecord> = Vec::with_capacity(budget);
    let mut attempt = 0u64;
    for scene in scenes {
        if out.len() == budget {
            break;
        }
        let scene = scene?;
        let rel = derive_relations(&scene)?;
        let mut failed: BTreeSet<Family> = BTreeSet::new();
        let mut programs: Vec<Program> = Vec::new();
        for _ in 0..QUESTIONS_PER_SCENE {
            if out.len() == budget {
                break;
            }
            // The least-served family this scene has not yet failed.
            let Some(family) = menu
                .families
                .iter()
                .filter(|f| !failed.contains(f))
                .min_by_key(|f| balance.emitted(**f))
                .copied()
            else {
                break;
            };
            let mut emitted = false;
            for _ in 0..TRIES_PER_SLOT {
                let s = seed.derive("attempt", attempt);
                attempt += 1;
                let t = menu.pick(family, &mut s.derive("template", 0).rng());
                let id = format!("{}_{:07}", spec.name, out.len());
                match instantiate_with(t, &scene, &rel, spec, &syn, &s, &id) {
                    Ok(q) if balance.accepts(family, q.answer) && !programs.contains(&q.program) => {
                        balance.add(family, q.answer);
                        programs.push(q.program.clone());
                        out.push(q);
                        emitted = true;
                        break;
                    }
                    Ok(_) | Err(Error::Unsatisfiable(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            if !emitted {
                failed.insert(family);
            }
        }
        used.push(scene);
    }
    if out.len() < budget {
        return Err(Error::Capacity(format!(
            "{}: {} of {budget} questions from {} scenes",
            spec.name,
            out.len(),
            used.len()
        )));
    }
    Ok((used, out))
}
