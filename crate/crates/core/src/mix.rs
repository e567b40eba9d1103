//! D3 replacement, mixtures over named sets, fraction grids and length
//! splits. Fractions stay exact rationals until they become counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, Zero};
use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{Dataset, QuestionRecord};
use crate::error::{Error, Result};
use crate::seed::SeedPath;

/// Exact nonnegative fraction, written `"p/q"` (or `"p"`) in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(pub Ratio<u64>);

impl Fraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::Config(format!("fraction {numer}/0")));
        }
        Ok(Fraction(Ratio::new(numer, denom)))
    }

    pub fn zero() -> Self {
        Fraction(Ratio::zero())
    }

    pub fn one() -> Self {
        Fraction(Ratio::one())
    }

    /// `round(self * n)` with halves rounded up.
    pub fn round_times(self, n: usize) -> usize {
        let (p, q) = (*self.0.numer() as u128, *self.0.denom() as u128);
        ((2 * p * n as u128 + q) / (2 * q)) as usize
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0.denom() {
            1 => write!(f, "{}", self.0.numer()),
            d => write!(f, "{}/{d}", self.0.numer()),
        }
    }
}

impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad fraction {s:?}; expected p/q"));
        let (p, q) = match s.split_once('/') {
            Some((p, q)) => (p.trim(), q.trim()),
            None => (s.trim(), "1"),
        };
        let p: u64 = p.parse().map_err(|_| bad())?;
        let q: u64 = q.parse().map_err(|_| bad())?;
        Fraction::new(p, q).map_err(|_| bad())
    }
}

impl Serialize for Fraction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn sorted_unique(mut records: Dataset) -> Result<Dataset> {
    records.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::Input(format!("duplicate record id {}", w[0].id)));
    }
    Ok(records)
}

/// `k` records of `pool` chosen uniformly without replacement.
fn sample(pool: &[QuestionRecord], k: usize, name: &str, seed: &SeedPath) -> Result<Dataset> {
    if k > pool.len() {
        return Err(Error::InsufficientSource {
            source_name: name.to_owned(),
            needed: k,
            available: pool.len(),
        });
    }
    let mut rng = seed.rng();
    let mut picked = index::sample(&mut rng, pool.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}

/// Replaces `round(proportion * |base|)` base records with records drawn
/// from `d3`. The result has `|base|` records, sorted by id.
pub fn apply_d3(
    base: &[QuestionRecord],
    d3: &[QuestionRecord],
    proportion: Fraction,
    seed: &SeedPath,
) -> Result<Dataset> {
    if proportion > Fraction::one() {
        return Err(Error::Config(format!("proportion {proportion} exceeds 1")));
    }
    let interior = proportion != Fraction::zero() && proportion != Fraction::one();
    if interior && (base.is_empty() || d3.is_empty()) {
        return Err(Error::Input("apply_d3 needs nonempty base and d3 sets".into()));
    }
    let n = base.len();
    let from_d3 = proportion.round_times(n);
    let seed = seed.derive("d3", 0);
    let mut out = sample(base, n - from_d3, "base", &seed.derive("base", 0))?;
    out.extend(sample(d3, from_d3, "d3", &seed.derive("d3", 0))?);
    sorted_unique(out)
}

/// Largest-remainder apportionment of `total` by `fractions`; ties in the
/// remainder go to the earlier entry.
pub fn apportion(fractions: &[Fraction], total: usize) -> Vec<usize> {
    let exact: Vec<Ratio<u128>> = fractions
        .iter()
        .map(|f| Ratio::new(*f.0.numer() as u128 * total as u128, *f.0.denom() as u128))
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor().to_integer() as usize).collect();
    let short = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| exact[b].fract().cmp(&exact[a].fract()).then(a.cmp(&b)));
    for &i in order.iter().take(short) {
        counts[i] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSource {
    pub name: String,
    pub fraction: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixturePlan {
    pub total: usize,
    pub seed: u64,
    pub sources: Vec<MixtureSource>,
}

impl MixturePlan {
    pub fn validate(&self) -> Result<()> {
        if self.total == 0 {
            return Err(Error::Config("mixture total must be positive".into()));
        }
        if self.sources.is_empty() {
            return Err(Error::Config("mixture has no sources".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.sources {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("source {} listed twice", s.name)));
            }
        }
        let sum = self
            .sources
            .iter()
            .fold(Ratio::<u64>::zero(), |acc, s| acc + s.fraction.0);
        if !sum.is_one() {
            return Err(Error::Config(format!(
                "fractions sum to {}/{}, not 1",
                sum.numer(),
                sum.denom()
            )));
        }
        Ok(())
    }

    pub fn counts(&self) -> Vec<usize> {
        let fractions: Vec<Fraction> = self.sources.iter().map(|s| s.fraction).collect();
        apportion(&fractions, self.total)
    }
}

/// Samples each source's apportioned share without replacement.
pub fn build_mixture(plan: &MixturePlan, pools: &BTreeMap<String, Dataset>) -> Result<Dataset> {
    plan.validate()?;
    let seed = SeedPath::new(plan.seed).derive("mixture", 0);
    let mut out = Vec::with_capacity(plan.total);
    for (i, (source, k)) in plan.sources.iter().zip(plan.counts()).enumerate() {
        let pool = pools
            .get(&source.name)
            .ok_or_else(|| Error::Input(format!("no pool for source {}", source.name)))?;
        out.extend(sample(pool, k, &source.name, &seed.derive(&source.name, i as u64))?);
    }
    sorted_unique(out)
}

/// Every length-`k` vector of multiples of `step` summing to one, in
/// ascending lexicographic order.
pub fn fraction_grid(k: usize, step: Fraction) -> Result<Vec<Vec<Fraction>>> {
    if k == 0 {
        return Err(Error::Config("grid needs at least one component".into()));
    }
    let (n, d) = (*step.0.numer(), *step.0.denom());
    if n == 0 || d % n != 0 {
        return Err(Error::Config(format!("1/({step}) is not an integer")));
    }
    let parts = d / n;

    fn go(k: usize, left: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if k == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 0..=left {
            prefix.push(x);
            go(k - 1, left - x, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    go(k, parts, &mut Vec::with_capacity(k), &mut raw);
    Ok(raw
        .into_iter()
        .map(|v| v.into_iter().map(|x| Fraction(Ratio::new(x, parts))).collect())
        .collect())
}

/// Program-length bands, in operations excluding the scene node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthBands {
    pub short_max: usize,
    pub base_exact: usize,
    pub long_min: usize,
    pub long_max: usize,
}

impl Default for LengthBands {
    fn default() -> Self {
        LengthBands {
            short_max: 2,
            base_exact: 3,
            long_min: 4,
            long_max: 9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthSplit {
    pub short: Dataset,
    pub base: Dataset,
    pub long: Dataset,
    /// Records in no band.
    pub other: Dataset,
}

pub fn length_split(ds: &[QuestionRecord], bands: LengthBands) -> Result<LengthSplit> {
    let LengthBands {
        short_max,
        base_exact,
        long_min,
        long_max,
    } = bands;
    if !(short_max < base_exact && base_exact < long_min && long_min <= long_max) {
        return Err(Error::Config(format!(
            "length bands must satisfy short_max < base_exact < long_min <= long_max, got {short_max}, {base_exact}, {long_min}, {long_max}"
        )));
    }
    let mut split = LengthSplit::default();
    for q in ds {
        let len = q.program.op_count();
        let part = if len <= short_max {
            &mut split.short
        } else if len == base_exact {
            &mut split.base
        } else if (long_min..=long_max).contains(&len) {
            &mut split.long
        } else {
            &mut split.other
        };
        part.push(q.clone());
    }
    Ok(split)
}
