//! Surface-text templates: per-predicate verb phrases, concept plurals, and
//! the concept names treated as people for pronoun choice. Editable as a JSON
//! file; a default bank covering the built-in vocabulary ships with the crate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub const DEFAULT_BANK_JSON: &str = include_str!("../../fixtures/template_bank.json");

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateSurface {
    /// Describes the subject of a fact given its object: "was drafted by".
    pub subject: String,
    /// Plural-subject agreement form: "were drafted by".
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject_plural: Option<String>,
    /// Describes the object of a fact given its subject: "drafted".
    pub object: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TemplateBank {
    #[serde(default)]
    pub predicates: BTreeMap<String, PredicateSurface>,
    #[serde(default)]
    pub concept_plurals: BTreeMap<String, String>,
    #[serde(default)]
    pub person_concepts: BTreeSet<String>,
}

impl Default for TemplateBank {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_BANK_JSON).expect("bundled template bank is valid")
    }
}

impl TemplateBank {
    pub fn from_json_str(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Verb phrase describing the subject side of `predicate`; unknown
    /// predicates fall back to `has relation <pred> with`.
    pub fn subject_surface(&self, predicate: &str, plural: bool) -> String {
        match self.predicates.get(predicate) {
            Some(p) => {
                if plural {
                    p.subject_plural.clone().unwrap_or_else(|| p.subject.clone())
                } else {
                    p.subject.clone()
                }
            }
            None => format!("has relation {predicate} with"),
        }
    }

    /// Verb phrase describing the object side of `predicate`.
    pub fn object_surface(&self, predicate: &str) -> String {
        match self.predicates.get(predicate) {
            Some(p) => p.object.clone(),
            None => format!("has relation {predicate} with"),
        }
    }

    pub fn plural_concept(&self, name: &str) -> String {
        if let Some(p) = self.concept_plurals.get(name) {
            return p.clone();
        }
        naive_plural(name)
    }

    pub fn is_person_concept(&self, name: &str) -> bool {
        self.person_concepts.contains(name)
    }
}

/// Last-word pluralization: `city` -> `cities`, `bus` -> `buses`,
/// `basketball player` -> `basketball players`.
fn naive_plural(name: &str) -> String {
    let Some(last_start) = name.rfind(' ').map(|i| i + 1) else {
        return pluralize_word(name);
    };
    format!("{}{}", &name[..last_start], pluralize_word(&name[last_start..]))
}

fn pluralize_word(w: &str) -> String {
    if let Some(stem) = w.strip_suffix('y') {
        if !stem.is_empty() && !"aeiou".contains(stem.chars().last().unwrap_or('a')) {
            return format!("{stem}ies");
        }
    }
    if w.ends_with('s') || w.ends_with('x') || w.ends_with("ch") || w.ends_with("sh") {
        return format!("{w}es");
    }
    format!("{w}s")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_loads() {
        let bank = TemplateBank::default();
        assert_eq!(bank.subject_surface("drafted by", false), "was drafted by");
        assert_eq!(bank.subject_surface("drafted by", true), "were drafted by");
        assert_eq!(bank.object_surface("drafted by"), "drafted");
        assert!(bank.is_person_concept("person"));
    }

    #[test]
    fn unknown_predicate_falls_back() {
        let bank = TemplateBank::default();
        assert_eq!(
            bank.subject_surface("sibling", false),
            "has relation sibling with"
        );
    }

    #[test]
    fn plurals() {
        let bank = TemplateBank::default();
        assert_eq!(bank.plural_concept("person"), "people");
        assert_eq!(bank.plural_concept("city"), "cities");
        assert_eq!(bank.plural_concept("basketball player"), "basketball players");
        assert_eq!(bank.plural_concept("team"), "teams");
    }
}
