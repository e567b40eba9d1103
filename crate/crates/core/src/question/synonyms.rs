use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Canonical token → surface forms. Surface forms are unambiguous: no
/// surface maps to two canonical tokens.
#[derive(Debug, Clone)]
pub struct SynonymTable {
    forms: BTreeMap<String, Vec<String>>,
    reverse: HashMap<String, String>,
}

impl SynonymTable {
    pub fn new(forms: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut reverse = HashMap::new();
        for (canon, surfaces) in &forms {
            if surfaces.is_empty() {
                return Err(Error::Vocabulary(format!("`{canon}` has no surface form")));
            }
            for s in surfaces {
                if s.is_empty() || s.contains(char::is_whitespace) {
                    return Err(Error::Vocabulary(format!("surface form `{s}` must be one word")));
                }
                if let Some(prev) = reverse.insert(s.clone(), canon.clone()) {
                    if prev != *canon {
                        return Err(Error::Vocabulary(format!(
                            "surface form `{s}` maps to both `{prev}` and `{canon}`"
                        )));
                    }
                }
            }
        }
        Ok(SynonymTable { forms, reverse })
    }

    pub fn surfaces(&self, canonical: &str) -> Result<&[String]> {
        self.forms
            .get(canonical)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Vocabulary(format!("no surface form for `{canonical}`")))
    }

    pub fn choose<R: Rng>(&self, canonical: &str, rng: &mut R) -> Result<&str> {
        Ok(self.surfaces(canonical)?.choose(rng).expect("non-empty").as_str())
    }

    /// Canonical token for a surface word, if the table knows it.
    pub fn resolve(&self, surface: &str) -> Option<&str> {
        self.reverse.get(surface).map(String::as_str)
    }
}

impl Default for SynonymTable {
    fn default() -> Self {
        let pairs: &[(&str, &[&str])] = &[
            ("gray", &["gray"]),
            ("red", &["red"]),
            ("blue", &["blue"]),
            ("green", &["green"]),
            ("brown", &["brown"]),
            ("purple", &["purple"]),
            ("cyan", &["cyan"]),
            ("yellow", &["yellow"]),
            ("small", &["small", "tiny"]),
            ("large", &["large", "big"]),
            ("rubber", &["rubber", "matte"]),
            ("metal", &["metal", "shiny"]),
            ("cube", &["cube", "block"]),
            ("sphere", &["sphere", "ball"]),
            ("cylinder", &["cylinder"]),
            ("object", &["object", "thing"]),
        ];
        let forms = pairs
            .iter()
            .map(|(c, s)| (c.to_string(), s.iter().map(|x| x.to_string()).collect()))
            .collect();
        SynonymTable::new(forms).expect("built-in table is consistent")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_resolves() {
        let t = SynonymTable::default();
        assert_eq!(t.resolve("shiny"), Some("metal"));
        assert_eq!(t.resolve("matte"), Some("rubber"));
        assert_eq!(t.resolve("big"), Some("large"));
        assert_eq!(t.resolve("ball"), Some("sphere"));
        assert_eq!(t.resolve("the"), None);
    }

    #[test]
    fn ambiguous_surface_rejected() {
        let forms = BTreeMap::from([
            ("metal".to_string(), vec!["shiny".to_string()]),
            ("rubber".to_string(), vec!["shiny".to_string()]),
        ]);
        assert!(matches!(SynonymTable::new(forms), Err(Error::Vocabulary(_))));
    }
}
