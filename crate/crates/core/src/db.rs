//! Entity store queried with belief-state constraints.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::acts::{BeliefState, DbResultSummary};
use crate::error::{CoreError, Result};
use crate::schema::Schema;

const TOY_DB: &str = include_str!("../data/toy_db.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub domain: String,
    pub values: BTreeMap<String, String>,
}

impl Entity {
    pub fn get(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(String::as_str)
    }

    pub fn matches(&self, constraints: &BTreeMap<String, String>) -> bool {
        constraints
            .iter()
            .all(|(s, v)| self.values.get(s).is_some_and(|ev| ev == v))
    }
}

/// Immutable per-domain entity lists in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    by_domain: BTreeMap<String, Vec<Entity>>,
}

impl Database {
    /// The bundled fixture: 8 hotels and 6 restaurants over [`Schema::toy`].
    pub fn toy(schema: &Schema) -> Self {
        Self::from_json_str(TOY_DB, "toy_db.json", schema).expect("bundled database is valid")
    }

    pub fn load(path: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text, path, schema)
    }

    pub fn from_json_str(text: &str, origin: impl AsRef<Path>, schema: &Schema) -> Result<Self> {
        let entities: Vec<Entity> =
            serde_json::from_str(text).map_err(|e| CoreError::parse(origin.as_ref(), &e))?;
        Self::from_entities(entities, schema)
    }

    pub fn from_entities(entities: Vec<Entity>, schema: &Schema) -> Result<Self> {
        let mut by_domain: BTreeMap<String, Vec<Entity>> = BTreeMap::new();
        for (i, e) in entities.into_iter().enumerate() {
            if !schema.is_domain(&e.domain) {
                return Err(CoreError::validation(
                    format!("entity[{i}].domain"),
                    format!("unknown domain `{}`", e.domain),
                ));
            }
            for (slot, value) in &e.values {
                if !schema.is_slot(&e.domain, slot) {
                    return Err(CoreError::validation(
                        format!("entity[{i}].{slot}"),
                        format!("`{slot}` is not a slot of `{}`", e.domain),
                    ));
                }
                if !schema.is_value(&e.domain, slot, value) {
                    return Err(CoreError::validation(
                        format!("entity[{i}].{slot}"),
                        format!("`{value}` is not in the vocabulary of `{}.{slot}`", e.domain),
                    ));
                }
            }
            by_domain.entry(e.domain.clone()).or_default().push(e);
        }
        Ok(Database { by_domain })
    }

    pub fn len(&self) -> usize {
        self.by_domain.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entities(&self, domain: &str) -> &[Entity] {
        self.by_domain.get(domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn domains(&self) -> impl Iterator<Item = &str> {
        self.by_domain.keys().map(String::as_str)
    }

    /// Entities of `domain` whose values equal every constraint, in file order.
    pub fn query(&self, domain: &str, constraints: &BTreeMap<String, String>) -> Vec<&Entity> {
        self.entities(domain)
            .iter()
            .filter(|e| e.matches(constraints))
            .collect()
    }

    /// Match count for every domain mentioned in the belief, in first-mention order.
    pub fn match_counts(&self, belief: &BeliefState) -> DbResultSummary {
        DbResultSummary::new(
            belief
                .domains()
                .into_iter()
                .map(|d| (d.to_string(), self.query(d, &belief.constraints(d)).len()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::BeliefTriplet;

    fn fixture() -> (Schema, Database) {
        let s = Schema::toy();
        let db = Database::toy(&s);
        (s, db)
    }

    fn brute_force<'a>(
        db: &'a Database,
        domain: &str,
        c: &BTreeMap<String, String>,
    ) -> Vec<&'a Entity> {
        let mut out = Vec::new();
        for e in db.entities(domain) {
            let mut ok = true;
            for (k, v) in c {
                if e.values.get(k) != Some(v) {
                    ok = false;
                }
            }
            if ok {
                out.push(e);
            }
        }
        out
    }

    #[test]
    fn fixture_counts() {
        let (_, db) = fixture();
        assert_eq!(db.len(), 14);
        assert_eq!(db.entities("hotel").len(), 8);
        assert_eq!(db.entities("restaurant").len(), 6);
        assert_eq!(db.domains().count(), 2);
    }

    #[test]
    fn empty_file_is_empty_db() {
        let s = Schema::toy();
        let db = Database::from_json_str("[]", "e.json", &s).unwrap();
        assert!(db.is_empty());
    }

    #[test]
    fn out_of_vocabulary_value_names_slot() {
        let s = Schema::toy();
        let text = r#"[{"domain":"hotel","values":{"area":"west"}}]"#;
        let err = Database::from_json_str(text, "e.json", &s).unwrap_err();
        assert!(err.to_string().contains("entity[0].area"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let s = Schema::toy();
        let err = Database::from_json_str("[\n{\"domain\": }", "e.json", &s).unwrap_err();
        match err {
            CoreError::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn query_matches_brute_force() {
        let (s, db) = fixture();
        let mut c = BTreeMap::new();
        assert_eq!(db.query("hotel", &c).len(), 8);
        c.insert("price".to_string(), "expensive".to_string());
        c.insert("area".to_string(), "north".to_string());
        let got = db.query("hotel", &c);
        assert_eq!(got, brute_force(&db, "hotel", &c));
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].get("name"), Some("harbour view"));

        // Every single-slot constraint against the oracle scan.
        for d in ["hotel", "restaurant"] {
            for slot in s.informable[d].iter() {
                for v in s.values(d, slot).unwrap() {
                    let c = BTreeMap::from([(slot.clone(), v.clone())]);
                    assert_eq!(db.query(d, &c), brute_force(&db, d, &c));
                }
            }
        }
        c.insert("type".to_string(), "guesthouse".to_string());
        assert!(db.query("hotel", &c).is_empty());
        assert!(db.query("taxi", &BTreeMap::new()).is_empty());
    }

    #[test]
    fn match_counts_follow_belief() {
        let (_, db) = fixture();
        assert!(db.match_counts(&BeliefState::default()).is_empty());
        let b = BeliefState::new(vec![BeliefTriplet::new("hotel", "area", "centre")]);
        let summary = db.match_counts(&b);
        assert_eq!(summary.counts, vec![("hotel".to_string(), 3)]);
        let b = BeliefState::new(vec![
            BeliefTriplet::new("restaurant", "food", "chinese"),
            BeliefTriplet::new("hotel", "type", "lodge"),
        ]);
        let c = db.match_counts(&b);
        assert_eq!(
            c.counts,
            vec![("restaurant".to_string(), 2), ("hotel".to_string(), 4)]
        );
    }
}
