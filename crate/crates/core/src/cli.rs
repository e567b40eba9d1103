//! The `d3forge` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

use crate::bias::audit;
use crate::build::{build_named_set, generate_set, scene_pool};
use crate::dataset::{
    read_dataset, read_predictions, read_scenes, write_atomic, write_dataset, write_jsonl, write_scenes,
};
use crate::error::{Error, Result};
use crate::eval::{attribute_breakdown, delta_heatmap, diversity_stats, reports_csv, score, EvalReport};
use crate::exec::execute;
use crate::mix::{apply_d3, build_mixture, fraction_grid, length_split, Fraction, LengthBands, MixturePlan};
use crate::oracle::oracle_execute;
use crate::question::{all_templates, random_program};
use crate::registry::{Registry, RegistryOverrides, ScenePool};
use crate::scene::Condition;
use crate::seed::SeedPath;

#[derive(Debug, Parser)]
#[command(
    name = "d3forge",
    version,
    about = "Biased synthetic VQA datasets, D3 mixing and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct SeedArg {
    /// Master seed.
    #[arg(long, env = "D3FORGE_SEED")]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a scene pool.
    GenScenes {
        #[arg(long, value_parser = parse_condition)]
        condition: Condition,
        #[arg(long, default_value_t = 3)]
        min_objects: usize,
        #[arg(long, default_value_t = 10)]
        max_objects: usize,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a named question set.
    GenQuestions {
        #[arg(long)]
        set: String,
        #[arg(long)]
        budget: usize,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
        /// Use these scenes instead of the set's generated pool.
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Where to write the generated scenes.
        #[arg(long)]
        scenes_out: Option<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Replace a fraction of a base set with D3 records.
    MixD3 {
        #[arg(long)]
        base: PathBuf,
        #[arg(long)]
        d3: PathBuf,
        #[arg(long)]
        proportion: Fraction,
        #[command(flatten)]
        seed: SeedArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a mixture plan from named pools.
    MixFractions {
        #[arg(long)]
        plan: PathBuf,
        /// `NAME=PATH`, once per source.
        #[arg(long = "pool", value_parser = parse_named_path)]
        pools: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate mixture vectors on a fraction grid.
    Grid {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        step: Fraction,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a dataset by program length.
    SplitLength {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2)]
        short_max: usize,
        #[arg(long, default_value_t = 3)]
        base_exact: usize,
        #[arg(long, default_value_t = 4)]
        long_min: usize,
        #[arg(long, default_value_t = 9)]
        long_max: usize,
    },
    /// Check a dataset against a named set's bias and tabulate it.
    Audit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        set: String,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions; repeat the three flags for several test sets.
    Eval {
        #[arg(long = "name", required = true)]
        names: Vec<String>,
        #[arg(long = "gold", required = true)]
        gold: Vec<PathBuf>,
        #[arg(long = "predictions", required = true)]
        predictions: Vec<PathBuf>,
        /// Leave questions without a prediction out instead of scoring them wrong.
        #[arg(long)]
        lenient: bool,
        /// Also write a per-attribute-value table (single-attribute sets only).
        #[arg(long)]
        breakdown: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Accuracy deltas of D3 variants over a base model.
    Heatmap {
        #[arg(long)]
        base: PathBuf,
        /// `NAME=REPORT`, once per variant.
        #[arg(long = "variant", value_parser = parse_named_path, required = true)]
        variants: Vec<(String, PathBuf)>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the executor with the reference evaluator on random programs.
    OracleCheck {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        programs_per_scene: usize,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn parse_condition(s: &str) -> std::result::Result<Condition, String> {
    match s {
        "A" | "a" => Ok(Condition::A),
        "B" | "b" => Ok(Condition::B),
        _ => Err(format!("expected A or B, got {s:?}")),
    }
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), path.into())),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

fn registry(path: Option<&Path>) -> Result<Registry> {
    match path {
        Some(p) => Registry::new(&RegistryOverrides::load(p)?),
        None => Ok(Registry::default()),
    }
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<()> {
    let body = serde_json::to_vec_pretty(v).expect("serializable");
    write_atomic(path, |w| {
        w.write_all(&body)?;
        w.write_all(b"\n")
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// Runs one command and returns its summary.
pub fn run(cmd: Command) -> Result<Value> {
    match cmd {
        Command::GenScenes {
            condition,
            min_objects,
            max_objects,
            n,
            seed,
            out,
        } => {
            let pool = ScenePool::new(condition, min_objects, max_objects);
            pool.config().validate()?;
            let scenes = scene_pool(&pool, n, &SeedPath::new(seed.seed))?;
            write_scenes(&scenes, &out)?;
            Ok(json!({"command": "gen-scenes", "pool": pool.label(), "scenes": scenes.len(), "out": path_str(&out)}))
        }
        Command::GenQuestions {
            set,
            budget,
            seed,
            out,
            scenes,
            scenes_out,
            registry: reg,
        } => {
            let reg = registry(reg.as_deref())?;
            let named = reg.get(&set)?;
            let master = SeedPath::new(seed.seed);
            let (scenes, questions) = match scenes {
                Some(path) => {
                    let scenes = read_scenes(&path)?;
                    let config = named.scenes.config();
                    for s in &scenes {
                        s.validate(&config)
                            .map_err(|e| Error::Input(format!("scene {} does not fit {set}: {e}", s.id)))?;
                    }
                    let q = build_named_set(named, &scenes, budget, &master)?;
                    (scenes, q)
                }
                None => generate_set(named, budget, &master)?,
            };
            write_dataset(&questions, &out)?;
            if let Some(p) = &scenes_out {
                write_scenes(&scenes, p)?;
            }
            Ok(
                json!({"command": "gen-questions", "set": set, "records": questions.len(), "scenes": scenes.len(), "out": path_str(&out)}),
            )
        }
        Command::MixD3 {
            base,
            d3,
            proportion,
            seed,
            out,
        } => {
            let b = read_dataset(&base)?;
            let d = read_dataset(&d3)?;
            let mixed = apply_d3(&b, &d, proportion, &SeedPath::new(seed.seed))?;
            write_dataset(&mixed, &out)?;
            let mut by_source: BTreeMap<&str, usize> = BTreeMap::new();
            for q in &mixed {
                *by_source.entry(q.source_set.as_str()).or_default() += 1;
            }
            Ok(json!({"command": "mix-d3", "records": mixed.len(), "by_source_set": by_source, "out": path_str(&out)}))
        }
        Command::MixFractions { plan, pools, out } => {
            let plan: MixturePlan = read_json(&plan)?;
            let mut loaded = BTreeMap::new();
            for (name, path) in &pools {
                if loaded.insert(name.clone(), read_dataset(path)?).is_some() {
                    return Err(Error::Input(format!("pool {name} given twice")));
                }
            }
            let mixed = build_mixture(&plan, &loaded)?;
            write_dataset(&mixed, &out)?;
            let counts: BTreeMap<&str, usize> = plan
                .sources
                .iter()
                .map(|s| s.name.as_str())
                .zip(plan.counts())
                .collect();
            Ok(json!({"command": "mix-fractions", "records": mixed.len(), "counts": counts, "out": path_str(&out)}))
        }
        Command::Grid { k, step, out } => {
            let grid = fraction_grid(k, step)?;
            if let Some(p) = &out {
                write_jsonl(&grid, p)?;
            }
            Ok(json!({"command": "grid", "k": k, "step": step.to_string(), "vectors": grid.len()}))
        }
        Command::SplitLength {
            input,
            out_dir,
            short_max,
            base_exact,
            long_min,
            long_max,
        } => {
            let ds = read_dataset(&input)?;
            let split = length_split(
                &ds,
                LengthBands {
                    short_max,
                    base_exact,
                    long_min,
                    long_max,
                },
            )?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let parts = [
                ("short", &split.short),
                ("base", &split.base),
                ("long", &split.long),
                ("other", &split.other),
            ];
            let mut sizes = BTreeMap::new();
            for (name, part) in parts {
                write_dataset(part, &out_dir.join(format!("{name}.jsonl")))?;
                sizes.insert(name, part.len());
            }
            Ok(
                json!({"command": "split-length", "records": ds.len(), "partitions": sizes, "out_dir": path_str(&out_dir)}),
            )
        }
        Command::Audit {
            input,
            set,
            registry: reg,
            out,
        } => {
            let reg = registry(reg.as_deref())?;
            let spec = &reg.get(&set)?.spec;
            let ds = read_dataset(&input)?;
            let violations = audit(&ds, spec);
            if let Some(p) = &out {
                let stats = diversity_stats(&ds);
                write_json(
                    p,
                    &json!({"set": set, "records": ds.len(), "violations": violations, "stats": stats}),
                )?;
            }
            Ok(json!({"command": "audit", "set": set, "records": ds.len(), "violations": violations.len()}))
        }
        Command::Eval {
            names,
            gold,
            predictions,
            lenient,
            breakdown,
            out_dir,
        } => {
            if names.len() != gold.len() || names.len() != predictions.len() {
                return Err(Error::Input(
                    "--name, --gold and --predictions must be given the same number of times".into(),
                ));
            }
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            let mut reports = Vec::new();
            let mut tables = BTreeMap::new();
            for ((name, g), p) in names.iter().zip(&gold).zip(&predictions) {
                let gold = read_dataset(g)?;
                let preds = read_predictions(p)?;
                reports.push(score(name, &preds, &gold, !lenient)?);
                if breakdown {
                    tables.insert(name.clone(), attribute_breakdown(&preds, &gold)?);
                }
            }
            write_json(&out_dir.join("report.json"), &reports)?;
            let csv = reports_csv(&reports);
            write_atomic(&out_dir.join("report.csv"), |w| w.write_all(csv.as_bytes()))?;
            if breakdown {
                write_json(&out_dir.join("attribute_breakdown.json"), &tables)?;
            }
            let acc: BTreeMap<&str, f64> = reports.iter().map(|r| (r.set_name.as_str(), r.accuracy)).collect();
            Ok(json!({"command": "eval", "accuracy": acc, "out_dir": path_str(&out_dir)}))
        }
        Command::Heatmap { base, variants, out } => {
            let base: Vec<EvalReport> = read_json(&base)?;
            let mut loaded = BTreeMap::new();
            for (name, path) in &variants {
                if loaded
                    .insert(name.clone(), read_json::<Vec<EvalReport>>(path)?)
                    .is_some()
                {
                    return Err(Error::Input(format!("variant {name} given twice")));
                }
            }
            let h = delta_heatmap(&base, &loaded)?;
            h.write_csv(&out)?;
            Ok(json!({"command": "heatmap", "rows": h.rows.len(), "columns": h.columns, "out": path_str(&out)}))
        }
        Command::OracleCheck {
            n,
            programs_per_scene,
            seed,
        } => {
            let r = oracle_check(n, programs_per_scene, &SeedPath::new(seed.seed))?;
            if r.mismatches > 0 {
                return Err(Error::Input(format!(
                    "executor and oracle disagree on {} of {} pairs",
                    r.mismatches, r.pairs
                )));
            }
            Ok(json!({"command": "oracle-check", "pairs": r.pairs, "answered": r.answered, "mismatches": 0}))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleReport {
    pub pairs: usize,
    /// Pairs where the program produced an answer rather than an error.
    pub answered: usize,
    pub mismatches: usize,
}

/// Random scenes (both conditions, 1 to 10 objects) against random
/// programs of every template shape. An error on both sides counts as
/// agreement when the error kinds match.
pub fn oracle_check(n: usize, per_scene: usize, seed: &SeedPath) -> Result<OracleReport> {
    let templates = all_templates();
    let seed = seed.derive("oracle-check", 0);
    let mut r = OracleReport {
        pairs: 0,
        answered: 0,
        mismatches: 0,
    };
    for i in 0..n as u64 {
        let mut rng = seed.derive("pick", i).rng();
        let condition = if rng.gen_bool(0.5) { Condition::A } else { Condition::B };
        let objects = rng.gen_range(1..=10);
        let pool = ScenePool::new(condition, objects, objects);
        let scene = crate::scene::sample_scene(&pool.config(), &format!("check_{i:07}"), &seed.derive("scene", i))?;
        for j in 0..per_scene {
            // Cycle hop counts so every depth is covered.
            let hop = j % 4;
            let shaped: Vec<_> = templates.iter().filter(|t| t.hop == hop).collect();
            let t = shaped.choose(&mut rng).unwrap();
            let p = random_program(t, &mut rng);
            let a = execute(&p, &scene).map_err(|e| e.kind());
            let b = oracle_execute(&p, &scene).map_err(|e| e.kind());
            r.pairs += 1;
            r.answered += a.is_ok() as usize;
            r.mismatches += (a != b) as usize;
        }
    }
    Ok(r)
}

fn error_json(kind: &str, message: &str) -> String {
    json!({"error": {"kind": kind, "message": message}}).to_string()
}

/// Parses `args`, runs the command and prints the summary or error.
/// Returns the process exit code.
pub fn main_with(args: impl IntoIterator<Item = impl Into<OsString> + Clone>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 1;
        }
    };
    match run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            e.exit_code()
        }
    }
}
