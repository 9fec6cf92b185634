//! Closed vocabularies of domains, intents, slots and slot values.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const INFORM: &str = "inform";
pub const REQUEST: &str = "request";
pub const BYE: &str = "bye";
/// Value carried by request quadruples.
pub const REQUEST_VALUE: &str = "?";
/// Value used when the database cannot supply one.
pub const NONE_VALUE: &str = "none";

const TOY_SCHEMA: &str = include_str!("../data/toy_schema.json");

/// Domain/intent/slot alphabets plus goal-sampling weights.
///
/// Maps are ordered so every iteration over a schema is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub domains: BTreeSet<String>,
    pub intents: BTreeSet<String>,
    pub slots: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    pub requestable: BTreeMap<String, BTreeSet<String>>,
    pub informable: BTreeMap<String, BTreeSet<String>>,
    pub goal_slot_weights: BTreeMap<String, BTreeMap<String, f64>>,
}

/// Lowercases and replaces whitespace with underscores.
pub fn normalize_name(name: &str) -> String {
    name.trim()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_ascii_lowercase()
}

fn check_name(field: &str, name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name.is_ascii()
        && !name.chars().any(|c| c.is_whitespace() || c.is_ascii_uppercase());
    if ok {
        Ok(())
    } else {
        Err(CoreError::validation(
            field,
            format!("`{name}` is not a lowercase whitespace-free token"),
        ))
    }
}

impl Schema {
    /// The bundled two-domain (hotel, restaurant) schema used by tests and demos.
    pub fn toy() -> Self {
        Self::from_json_str(TOY_SCHEMA, "toy_schema.json").expect("bundled schema is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text, path)
    }

    pub fn from_json_str(text: &str, origin: impl AsRef<Path>) -> Result<Self> {
        let raw: Schema =
            serde_json::from_str(text).map_err(|e| CoreError::parse(origin.as_ref(), &e))?;
        let schema = raw.normalized();
        schema.validate()?;
        Ok(schema)
    }

    fn normalized(self) -> Self {
        let set = |s: BTreeSet<String>| s.iter().map(|n| normalize_name(n)).collect();
        let per_domain_set = |m: BTreeMap<String, BTreeSet<String>>| {
            m.into_iter()
                .map(|(d, s)| (normalize_name(&d), set(s)))
                .collect()
        };
        Schema {
            domains: set(self.domains),
            intents: set(self.intents),
            slots: self
                .slots
                .into_iter()
                .map(|(d, slots)| {
                    let slots = slots
                        .into_iter()
                        .map(|(s, values)| (normalize_name(&s), values))
                        .collect();
                    (normalize_name(&d), slots)
                })
                .collect(),
            requestable: per_domain_set(self.requestable),
            informable: per_domain_set(self.informable),
            goal_slot_weights: self
                .goal_slot_weights
                .into_iter()
                .map(|(d, w)| {
                    let w = w.into_iter().map(|(s, x)| (normalize_name(&s), x)).collect();
                    (normalize_name(&d), w)
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(CoreError::validation("domains", "schema has no domains"));
        }
        for d in &self.domains {
            check_name("domains", d)?;
        }
        for i in &self.intents {
            check_name("intents", i)?;
        }
        for required in [INFORM, REQUEST] {
            if !self.intents.contains(required) {
                return Err(CoreError::validation(
                    "intents",
                    format!("missing required intent `{required}`"),
                ));
            }
        }
        for (d, slots) in &self.slots {
            if !self.domains.contains(d) {
                return Err(CoreError::validation("slots", format!("unknown domain `{d}`")));
            }
            for (s, values) in slots {
                check_name("slots", s)?;
                if values.is_empty() {
                    return Err(CoreError::validation(
                        "slots",
                        format!("slot `{d}.{s}` has an empty value vocabulary"),
                    ));
                }
                if let Some(v) = values.iter().find(|v| v.split_whitespace().next().is_none()) {
                    return Err(CoreError::validation(
                        "slots",
                        format!("slot `{d}.{s}` has blank value `{v}`"),
                    ));
                }
            }
        }
        for d in &self.domains {
            if !self.slots.contains_key(d) {
                return Err(CoreError::validation("slots", format!("domain `{d}` has no slots")));
            }
        }
        for (field, map) in [("requestable", &self.requestable), ("informable", &self.informable)] {
            for (d, slots) in map {
                for s in slots {
                    if !self.is_slot(d, s) {
                        return Err(CoreError::validation(
                            field,
                            format!("`{d}.{s}` is not a slot of its domain"),
                        ));
                    }
                }
            }
        }
        for d in &self.domains {
            let weights = self.goal_slot_weights.get(d).ok_or_else(|| {
                CoreError::validation("goal_slot_weights", format!("domain `{d}` has no weights"))
            })?;
            for (s, w) in weights {
                if !self.is_slot(d, s) {
                    return Err(CoreError::validation(
                        "goal_slot_weights",
                        format!("`{d}.{s}` is not a slot of its domain"),
                    ));
                }
                if !(w.is_finite() && *w >= 0.0) {
                    return Err(CoreError::validation(
                        "goal_slot_weights",
                        format!("weight of `{d}.{s}` must be a finite non-negative number"),
                    ));
                }
            }
            if !weights.values().any(|w| *w > 0.0) {
                return Err(CoreError::validation(
                    "goal_slot_weights",
                    format!("domain `{d}` needs at least one positive weight"),
                ));
            }
        }
        for d in self.goal_slot_weights.keys() {
            if !self.domains.contains(d) {
                return Err(CoreError::validation(
                    "goal_slot_weights",
                    format!("unknown domain `{d}`"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_domain(&self, d: &str) -> bool {
        self.domains.contains(d)
    }

    pub fn is_intent(&self, i: &str) -> bool {
        self.intents.contains(i)
    }

    pub fn is_slot(&self, domain: &str, slot: &str) -> bool {
        self.slots.get(domain).is_some_and(|s| s.contains_key(slot))
    }

    /// True when `slot` names a slot in any domain.
    pub fn is_any_slot(&self, slot: &str) -> bool {
        self.slots.values().any(|s| s.contains_key(slot))
    }

    pub fn values(&self, domain: &str, slot: &str) -> Option<&[String]> {
        self.slots.get(domain)?.get(slot).map(Vec::as_slice)
    }

    pub fn is_value(&self, domain: &str, slot: &str, value: &str) -> bool {
        self.values(domain, slot)
            .is_some_and(|vs| vs.iter().any(|v| v == value))
    }

    pub fn slot_names(&self, domain: &str) -> impl Iterator<Item = &str> {
        self.slots
            .get(domain)
            .into_iter()
            .flat_map(|m| m.keys().map(String::as_str))
    }

    pub fn is_requestable(&self, domain: &str, slot: &str) -> bool {
        self.requestable.get(domain).is_some_and(|s| s.contains(slot))
    }

    pub fn is_informable(&self, domain: &str, slot: &str) -> bool {
        self.informable.get(domain).is_some_and(|s| s.contains(slot))
    }

    pub fn weight(&self, domain: &str, slot: &str) -> f64 {
        self.goal_slot_weights
            .get(domain)
            .and_then(|w| w.get(slot))
            .copied()
            .unwrap_or(0.0)
    }
}
