//! Scoring external predictions and the reporting tables built on them.
//!
//! Everything is tallied in integers; rates are divided out at the end.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_atomic, PredictionRecord, QuestionRecord};
use crate::error::{Error, Result};
use crate::exec::Answer;
use crate::signature::{CompositionSignature, Family};
use crate::vocab::{AttrType, AttrValue};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub n: usize,
    pub correct: usize,
}

impl Tally {
    fn add(&mut self, ok: bool) {
        self.n += 1;
        self.correct += ok as usize;
    }

    pub fn accuracy(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.correct as f64 / self.n as f64
        }
    }

    pub fn exact(&self) -> Ratio<i64> {
        Ratio::new(self.correct as i64, self.n.max(1) as i64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub set_name: String,
    pub n: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub per_family: BTreeMap<Family, Tally>,
    pub per_hop: BTreeMap<usize, Tally>,
    pub missing_predictions: usize,
}

impl EvalReport {
    pub fn tally(&self) -> Tally {
        Tally {
            n: self.n,
            correct: self.correct,
        }
    }
}

/// Validates predictions against `gold` and maps id to answer.
fn index_predictions<'a>(preds: &'a [PredictionRecord], gold: &[QuestionRecord]) -> Result<HashMap<&'a str, Answer>> {
    let ids: BTreeSet<&str> = gold.iter().map(|q| q.id.as_str()).collect();
    let mut out = HashMap::with_capacity(preds.len());
    for p in preds {
        if !ids.contains(p.question_id.as_str()) {
            return Err(Error::Input(format!(
                "prediction for unknown question {}",
                p.question_id
            )));
        }
        let answer: Answer = p
            .answer
            .parse()
            .map_err(|e| Error::Input(format!("prediction for {}: {e}", p.question_id)))?;
        if out.insert(p.question_id.as_str(), answer).is_some() {
            return Err(Error::Input(format!("duplicate prediction for {}", p.question_id)));
        }
    }
    Ok(out)
}

/// Exact-match accuracy. In strict mode gold records without a prediction
/// count as wrong; otherwise they are left out of `n`.
pub fn score(set_name: &str, preds: &[PredictionRecord], gold: &[QuestionRecord], strict: bool) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::Input("gold dataset is empty".into()));
    }
    let index = index_predictions(preds, gold)?;
    let mut all = Tally::default();
    let mut per_family: BTreeMap<Family, Tally> = BTreeMap::new();
    let mut per_hop: BTreeMap<usize, Tally> = BTreeMap::new();
    let mut missing = 0;
    for q in gold {
        let ok = match index.get(q.id.as_str()) {
            Some(&a) => a == q.answer,
            None => {
                missing += 1;
                if !strict {
                    continue;
                }
                false
            }
        };
        all.add(ok);
        per_family.entry(q.family).or_default().add(ok);
        per_hop.entry(q.hop).or_default().add(ok);
    }
    if all.n == 0 {
        return Err(Error::Input(format!("{set_name}: no scored questions")));
    }
    Ok(EvalReport {
        set_name: set_name.to_owned(),
        n: all.n,
        correct: all.correct,
        accuracy: all.accuracy(),
        per_family,
        per_hop,
        missing_predictions: missing,
    })
}

/// `set,name,n,accuracy` rows: the whole set, then each family and hop.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from("set,name,n,accuracy\n");
    for r in reports {
        let _ = writeln!(out, "{},all,{},{:.6}", r.set_name, r.n, r.accuracy);
        for (f, t) in &r.per_family {
            let _ = writeln!(out, "{},family:{f},{},{:.6}", r.set_name, t.n, t.accuracy());
        }
        for (h, t) in &r.per_hop {
            let _ = writeln!(out, "{},hop:{h},{},{:.6}", r.set_name, t.n, t.accuracy());
        }
    }
    out
}

/// Accuracy change of each D3 variant over the base model, per test set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Ratio<i64>>)>,
}

impl Heatmap {
    /// Cell value in percentage points.
    pub fn points(&self, row: usize, col: usize) -> f64 {
        let r = self.rows[row].1[col] * Ratio::from_integer(100);
        *r.numer() as f64 / *r.denom() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("d3");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (i, (name, cells)) in self.rows.iter().enumerate() {
            out.push_str(name);
            for j in 0..cells.len() {
                let _ = write!(out, ",{:.4}", self.points(i, j));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let body = self.to_csv();
        write_atomic(path, |w| w.write_all(body.as_bytes()))
    }
}

/// Columns follow `base`; rows follow the variant names' order.
pub fn delta_heatmap(base: &[EvalReport], variants: &BTreeMap<String, Vec<EvalReport>>) -> Result<Heatmap> {
    let columns: Vec<String> = base.iter().map(|r| r.set_name.clone()).collect();
    if columns.iter().collect::<BTreeSet<_>>().len() != columns.len() {
        return Err(Error::Input("base reports repeat a set name".into()));
    }
    let mut rows = Vec::with_capacity(variants.len());
    for (name, reports) in variants {
        let by_set: BTreeMap<&str, &EvalReport> = reports.iter().map(|r| (r.set_name.as_str(), r)).collect();
        if by_set.len() != reports.len() || by_set.len() != base.len() {
            return Err(Error::Input(format!("variant {name}: test sets do not match the base")));
        }
        let cells = base
            .iter()
            .map(|b| {
                let v = by_set
                    .get(b.set_name.as_str())
                    .ok_or_else(|| Error::Input(format!("variant {name} lacks set {}", b.set_name)))?;
                Ok(v.tally().exact() - b.tally().exact())
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((name.clone(), cells));
    }
    Ok(Heatmap { columns, rows })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeCell {
    pub attr_type: AttrType,
    #[serde(serialize_with = "value_str")]
    pub value: AttrValue,
    pub tally: Tally,
}

fn value_str<S: serde::Serializer>(v: &AttrValue, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(v.as_str())
}

/// Accuracy grouped by the single attribute value each question filters on.
pub fn attribute_breakdown(preds: &[PredictionRecord], gold: &[QuestionRecord]) -> Result<Vec<AttributeCell>> {
    let index = index_predictions(preds, gold)?;
    let mut groups: BTreeMap<(AttrType, AttrValue), Tally> = BTreeMap::new();
    for q in gold {
        let filters: Vec<AttrValue> = q.program.filters().collect();
        let [v] = filters[..] else {
            return Err(Error::Input(format!(
                "record {} has {} filters; the breakdown needs exactly one",
                q.id,
                filters.len()
            )));
        };
        let ok = index.get(q.id.as_str()) == Some(&q.answer);
        groups.entry((v.attr_type(), v)).or_default().add(ok);
    }
    Ok(groups
        .into_iter()
        .map(|((attr_type, value), tally)| AttributeCell {
            attr_type,
            value,
            tally,
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiversityStats {
    /// Attribute occurrences per family.
    pub cooccurrence: BTreeMap<Family, BTreeMap<AttrType, usize>>,
    pub family_counts: BTreeMap<Family, usize>,
    pub hop_histogram: BTreeMap<usize, usize>,
    pub signature_coverage: BTreeSet<CompositionSignature>,
}

pub fn diversity_stats(ds: &[QuestionRecord]) -> DiversityStats {
    let mut s = DiversityStats::default();
    for q in ds {
        let row = s.cooccurrence.entry(q.family).or_default();
        for &a in q.signature.attrs.items() {
            *row.entry(a).or_default() += 1;
        }
        *s.family_counts.entry(q.family).or_default() += 1;
        *s.hop_histogram.entry(q.hop).or_default() += 1;
        s.signature_coverage.insert(q.signature.clone());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{Program, ProgramNode};
    use crate::vocab::{Color, Material, Size};

    fn record(id: usize, v: AttrValue, answer: Answer) -> QuestionRecord {
        let p = Program::new(vec![
            ProgramNode::scene(),
            ProgramNode::filter(v, 0),
            ProgramNode::unary(crate::program::Op::Exist, 1),
        ])
        .unwrap();
        QuestionRecord::new(format!("q{id}"), "s".into(), "?".into(), p, answer, "t".into())
    }

    fn pred(id: usize, a: &str) -> PredictionRecord {
        PredictionRecord {
            question_id: format!("q{id}"),
            answer: a.into(),
        }
    }

    fn fixture(n: usize) -> Vec<QuestionRecord> {
        let values = [
            AttrValue::Color(Color::Red),
            AttrValue::Size(Size::Small),
            AttrValue::Material(Material::Metal),
        ];
        (0..n)
            .map(|i| record(i, values[i % 3], Answer::Bool(i % 2 == 0)))
            .collect()
    }

    fn with_correct(gold: &[QuestionRecord], k: usize) -> Vec<PredictionRecord> {
        gold.iter()
            .enumerate()
            .map(|(i, q)| {
                let a = match (i < k, q.answer) {
                    (true, a) => a,
                    (false, Answer::Bool(b)) => Answer::Bool(!b),
                    (false, Answer::Count(c)) => Answer::Count(c + 1),
                };
                pred(i, &a.as_string())
            })
            .collect()
    }

    #[test]
    fn perfect_and_empty() {
        let gold = fixture(30);
        let r = score("t", &with_correct(&gold, 30), &gold, true).unwrap();
        assert_eq!(r.accuracy, 1.0);
        let r = score("t", &[], &gold, true).unwrap();
        assert_eq!((r.accuracy, r.missing_predictions, r.n), (0.0, 30, 30));
        assert!(score("t", &[], &gold, false).is_err());
    }

    #[test]
    fn slices_sum_and_order_invariance() {
        let gold = fixture(1000);
        let mut preds = with_correct(&gold, 292);
        let r = score("t", &preds, &gold, true).unwrap();
        assert_eq!(r.accuracy, 0.292);
        assert_eq!(r.per_family.values().map(|t| t.n).sum::<usize>(), r.n);
        assert_eq!(r.per_hop.values().map(|t| t.n).sum::<usize>(), r.n);
        preds.reverse();
        assert_eq!(score("t", &preds, &gold, true).unwrap(), r);
    }

    #[test]
    fn bad_predictions() {
        let gold = fixture(3);
        assert!(score("t", &[pred(0, "yes"), pred(0, "no")], &gold, true).is_err());
        assert!(score("t", &[pred(9, "yes")], &gold, true).is_err());
        assert!(score("t", &[pred(0, "maybe")], &gold, true).is_err());
    }

    #[test]
    fn heatmap() {
        let gold = fixture(1000);
        let base = vec![score("2Hop-OOD", &with_correct(&gold, 292), &gold, true).unwrap()];
        let var = vec![score("2Hop-OOD", &with_correct(&gold, 640), &gold, true).unwrap()];
        let h = delta_heatmap(&base, &BTreeMap::from([("1Hop-Full".to_string(), var.clone())])).unwrap();
        assert!((h.points(0, 0) - 34.8).abs() < 1e-9);
        assert_eq!(h.to_csv(), "d3,2Hop-OOD\n1Hop-Full,34.8000\n");
        let back = delta_heatmap(&var, &BTreeMap::from([("x".to_string(), base.clone())])).unwrap();
        assert_eq!(back.rows[0].1[0], -h.rows[0].1[0]);
        let same = delta_heatmap(&base, &BTreeMap::from([("x".to_string(), base.clone())])).unwrap();
        assert_eq!(same.rows[0].1[0], Ratio::from_integer(0));
        let mut other = base.clone();
        other[0].set_name = "3Hop-A".into();
        assert!(delta_heatmap(&base, &BTreeMap::from([("x".to_string(), other)])).is_err());
    }

    #[test]
    fn breakdown_matches_cooccurrence() {
        let gold = fixture(300);
        let preds: Vec<_> = gold
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let right = q.signature.attrs.items()[0] == AttrType::Color;
                let a = if right { q.answer.as_string() } else { "7".into() };
                pred(i, &a)
            })
            .collect();
        let cells = attribute_breakdown(&preds, &gold).unwrap();
        for c in &cells {
            let want = if c.attr_type == AttrType::Color { c.tally.n } else { 0 };
            assert_eq!(c.tally.correct, want);
        }
        let stats = diversity_stats(&gold);
        for c in &cells {
            assert_eq!(stats.cooccurrence[&Family::Exist][&c.attr_type], c.tally.n);
        }
        assert_eq!(cells.iter().map(|c| c.tally.n).sum::<usize>(), gold.len());
        assert_eq!(stats.hop_histogram, BTreeMap::from([(0, 300)]));
        let single = diversity_stats(&gold[..1]);
        assert_eq!(single.hop_histogram, BTreeMap::from([(0, 1)]));
    }
}
