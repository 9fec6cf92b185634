//! Dialogue acts, belief states, user goals and database summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::schema::{Schema, INFORM, REQUEST, REQUEST_VALUE};

/// One (domain, intent, slot) triplet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct AtomicAct {
    pub domain: String,
    pub intent: String,
    pub slot: String,
}

impl AtomicAct {
    pub fn new(domain: impl Into<String>, intent: impl Into<String>, slot: impl Into<String>) -> Self {
        AtomicAct {
            domain: domain.into(),
            intent: intent.into(),
            slot: slot.into(),
        }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if !schema.is_domain(&self.domain) {
            return Err(CoreError::validation(
                "domain",
                format!("unknown domain `{}`", self.domain),
            ));
        }
        if !schema.is_intent(&self.intent) {
            return Err(CoreError::validation(
                "intent",
                format!("unknown intent `{}`", self.intent),
            ));
        }
        if !schema.is_slot(&self.domain, &self.slot) {
            return Err(CoreError::validation(
                "slot",
                format!("`{}` is not a slot of domain `{}`", self.slot, self.domain),
            ));
        }
        Ok(())
    }

    pub fn is_inform(&self) -> bool {
        self.intent == INFORM
    }

    pub fn is_request(&self) -> bool {
        self.intent == REQUEST
    }
}

impl From<(String, String, String)> for AtomicAct {
    fn from((domain, intent, slot): (String, String, String)) -> Self {
        AtomicAct { domain, intent, slot }
    }
}

impl From<AtomicAct> for (String, String, String) {
    fn from(a: AtomicAct) -> Self {
        (a.domain, a.intent, a.slot)
    }
}

impl fmt::Display for AtomicAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.domain, self.intent, self.slot)
    }
}

/// (domain, intent, slot, value). Serialized as a 4-element JSON array.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(
    from = "(String, String, String, String)",
    into = "(String, String, String, String)"
)]
pub struct Quadruple {
    pub domain: String,
    pub intent: String,
    pub slot: String,
    pub value: String,
}

impl Quadruple {
    pub fn new(
        domain: impl Into<String>,
        intent: impl Into<String>,
        slot: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Quadruple {
            domain: domain.into(),
            intent: intent.into(),
            slot: slot.into(),
            value: value.into(),
        }
    }

    pub fn triplet(&self) -> AtomicAct {
        AtomicAct::new(&self.domain, &self.intent, &self.slot)
    }

    pub fn is_inform(&self) -> bool {
        self.intent == INFORM
    }

    pub fn is_request(&self) -> bool {
        self.intent == REQUEST
    }
}

impl From<(String, String, String, String)> for Quadruple {
    fn from((domain, intent, slot, value): (String, String, String, String)) -> Self {
        Quadruple { domain, intent, slot, value }
    }
}

impl From<Quadruple> for (String, String, String, String) {
    fn from(q: Quadruple) -> Self {
        (q.domain, q.intent, q.slot, q.value)
    }
}

impl fmt::Display for Quadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.domain, self.intent, self.slot, self.value)
    }
}

/// Ordered list of quadruples; the unit a policy emits and the simulator consumes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueAct {
    pub quadruples: Vec<Quadruple>,
}

impl DialogueAct {
    pub fn new(quadruples: Vec<Quadruple>) -> Self {
        DialogueAct { quadruples }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.quadruples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.quadruples.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Quadruple> {
        self.quadruples.iter()
    }

    pub fn triplets(&self) -> Vec<AtomicAct> {
        self.quadruples.iter().map(Quadruple::triplet).collect()
    }

    /// Checks every triplet against the schema and the request-value rule.
    ///
    /// Inform values are not checked against the vocabulary here; a user act
    /// additionally needs [`DialogueAct::validate_user`].
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (i, q) in self.quadruples.iter().enumerate() {
            q.triplet().validate(schema).map_err(|e| match e {
                CoreError::Validation { field, detail } => {
                    CoreError::validation(format!("act[{i}].{field}"), detail)
                }
                other => other,
            })?;
            if q.is_request() && q.value != REQUEST_VALUE {
                return Err(CoreError::validation(
                    format!("act[{i}].value"),
                    format!("request of `{}` must carry `?`, got `{}`", q.slot, q.value),
                ));
            }
        }
        Ok(())
    }

    /// Stricter check for user acts: informed values must be in the slot vocabulary.
    pub fn validate_user(&self, schema: &Schema) -> Result<()> {
        self.validate(schema)?;
        for (i, q) in self.quadruples.iter().enumerate() {
            if q.is_inform() && !schema.is_value(&q.domain, &q.slot, &q.value) {
                return Err(CoreError::validation(
                    format!("act[{i}].value"),
                    format!("`{}` is not a value of `{}.{}`", q.value, q.domain, q.slot),
                ));
            }
        }
        Ok(())
    }
}

impl FromIterator<Quadruple> for DialogueAct {
    fn from_iter<T: IntoIterator<Item = Quadruple>>(iter: T) -> Self {
        DialogueAct::new(iter.into_iter().collect())
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, q) in self.quadruples.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, "]")
    }
}

/// (domain, slot, value) entry of the belief state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct BeliefTriplet {
    pub domain: String,
    pub slot: String,
    pub value: String,
}

impl BeliefTriplet {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>, value: impl Into<String>) -> Self {
        BeliefTriplet {
            domain: domain.into(),
            slot: slot.into(),
            value: value.into(),
        }
    }
}

impl From<(String, String, String)> for BeliefTriplet {
    fn from((domain, slot, value): (String, String, String)) -> Self {
        BeliefTriplet { domain, slot, value }
    }
}

impl From<BeliefTriplet> for (String, String, String) {
    fn from(b: BeliefTriplet) -> Self {
        (b.domain, b.slot, b.value)
    }
}

/// Marker for a belief slot whose value is not in the vocabulary.
pub const UNKNOWN_VALUE: &str = "[unk]";

/// Tracked user constraints, in first-mention order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefState {
    pub triplets: Vec<BeliefTriplet>,
}

impl BeliefState {
    pub fn new(triplets: Vec<BeliefTriplet>) -> Self {
        BeliefState { triplets }
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        for (i, t) in self.triplets.iter().enumerate() {
            if !schema.is_slot(&t.domain, &t.slot) {
                return Err(CoreError::validation(
                    format!("belief[{i}].slot"),
                    format!("`{}.{}` is not a schema slot", t.domain, t.slot),
                ));
            }
            if t.value != UNKNOWN_VALUE && !schema.is_value(&t.domain, &t.slot, &t.value) {
                return Err(CoreError::validation(
                    format!("belief[{i}].value"),
                    format!("`{}` is not a value of `{}.{}`", t.value, t.domain, t.slot),
                ));
            }
        }
        Ok(())
    }

    /// Sets `domain.slot = value`, keeping the original position of an existing entry.
    pub fn set(&mut self, domain: &str, slot: &str, value: &str) {
        match self
            .triplets
            .iter_mut()
            .find(|t| t.domain == domain && t.slot == slot)
        {
            Some(t) => t.value = value.to_string(),
            None => self.triplets.push(BeliefTriplet::new(domain, slot, value)),
        }
    }

    /// Rule-based tracking: every user inform overwrites the slot's value.
    pub fn update_from_user_act(&mut self, act: &DialogueAct) {
        for q in act.iter().filter(|q| q.is_inform()) {
            self.set(&q.domain, &q.slot, &q.value);
        }
    }

    /// Domains in first-mention order.
    pub fn domains(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for t in &self.triplets {
            if !seen.contains(&t.domain.as_str()) {
                seen.push(t.domain.as_str());
            }
        }
        seen
    }

    /// Known (non-unknown) constraints for one domain.
    pub fn constraints(&self, domain: &str) -> BTreeMap<String, String> {
        self.triplets
            .iter()
            .filter(|t| t.domain == domain && t.value != UNKNOWN_VALUE)
            .map(|t| (t.slot.clone(), t.value.clone()))
            .collect()
    }
}

/// Hidden user goal: constraints C and requests R per domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserGoal {
    pub constraints: BTreeMap<String, BTreeMap<String, String>>,
    pub requests: BTreeMap<String, BTreeSet<String>>,
}

impl UserGoal {
    pub fn domains(&self) -> BTreeSet<&str> {
        self.constraints
            .keys()
            .chain(self.requests.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn constraint(&self, domain: &str, slot: &str) -> Option<&str> {
        self.constraints.get(domain)?.get(slot).map(String::as_str)
    }

    pub fn is_requested(&self, domain: &str, slot: &str) -> bool {
        self.requests.get(domain).is_some_and(|r| r.contains(slot))
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.values().map(BTreeMap::len).sum()
    }

    pub fn num_requests(&self) -> usize {
        self.requests.values().map(BTreeSet::len).sum()
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.domains().is_empty() {
            return Err(CoreError::validation("goal", "goal has no domain"));
        }
        for (d, cs) in &self.constraints {
            for (s, v) in cs {
                if !schema.is_informable(d, s) {
                    return Err(CoreError::validation(
                        "goal.constraints",
                        format!("`{d}.{s}` is not informable"),
                    ));
                }
                if !schema.is_value(d, s, v) {
                    return Err(CoreError::validation(
                        "goal.constraints",
                        format!("`{v}` is not a value of `{d}.{s}`"),
                    ));
                }
                if self.is_requested(d, s) {
                    return Err(CoreError::validation(
                        "goal",
                        format!("`{d}.{s}` is both constrained and requested"),
                    ));
                }
            }
        }
        for (d, rs) in &self.requests {
            for s in rs {
                if !schema.is_requestable(d, s) {
                    return Err(CoreError::validation(
                        "goal.requests",
                        format!("`{d}.{s}` is not requestable"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Match counts per queried domain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DbResultSummary {
    pub counts: Vec<(String, usize)>,
}

impl DbResultSummary {
    pub fn new(counts: Vec<(String, usize)>) -> Self {
        DbResultSummary { counts }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, domain: &str) -> Option<usize> {
        self.counts.iter().find(|(d, _)| d == domain).map(|(_, c)| *c)
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (d, _) in &self.counts {
            if !schema.is_domain(d) {
                return Err(CoreError::validation("db.domain", format!("unknown domain `{d}`")));
            }
            if !seen.insert(d) {
                return Err(CoreError::validation("db.domain", format!("duplicate domain `{d}`")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadruple_serializes_as_array() {
        let q = Quadruple::new("flight", "request", "time", "?");
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"["flight","request","time","?"]"#);
        let back: Quadruple = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
    }

    #[test]
    fn request_needs_placeholder() {
        let schema = Schema::toy();
        let bad = DialogueAct::new(vec![Quadruple::new("hotel", "request", "name", "x")]);
        let err = bad.validate(&schema).unwrap_err();
        assert!(err.to_string().contains("act[0].value"), "{err}");
        let good = DialogueAct::new(vec![Quadruple::new("hotel", "request", "name", "?")]);
        good.validate(&schema).unwrap();
    }

    #[test]
    fn invalid_slot_is_named() {
        let schema = Schema::toy();
        let act = DialogueAct::new(vec![Quadruple::new("hotel", "inform", "stars", "4")]);
        let err = act.validate(&schema).unwrap_err();
        match err {
            CoreError::Validation { field, detail } => {
                assert_eq!(field, "act[0].slot");
                assert!(detail.contains("stars"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn belief_update_keeps_first_mention_order() {
        let mut b = BeliefState::default();
        b.update_from_user_act(&DialogueAct::new(vec![
            Quadruple::new("hotel", "inform", "area", "north"),
            Quadruple::new("hotel", "inform", "price", "cheap"),
        ]));
        b.update_from_user_act(&DialogueAct::new(vec![Quadruple::new(
            "hotel", "inform", "area", "south",
        )]));
        assert_eq!(b.triplets[0], BeliefTriplet::new("hotel", "area", "south"));
        assert_eq!(b.triplets.len(), 2);
    }

    #[test]
    fn goal_rejects_overlap() {
        let schema = Schema::toy();
        let mut g = UserGoal::default();
        g.constraints
            .entry("hotel".into())
            .or_default()
            .insert("area".into(), "north".into());
        g.validate(&schema).unwrap();
        g.requests
            .entry("hotel".into())
            .or_default()
            .insert("price".into());
        assert!(g.validate(&schema).is_err());
    }
}
