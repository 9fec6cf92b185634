//! Action interpreter: turns decoder tokens into schema-valid atomic acts and
//! fills slot values from the database.

use serde::{Deserialize, Serialize};

use crate::acts::{AtomicAct, BeliefState, BeliefTriplet, DialogueAct, Quadruple};
use crate::db::Database;
use crate::error::Result;
use crate::schema::{Schema, NONE_VALUE, REQUEST_VALUE};
use crate::text::END;

/// Why a token was dropped by [`parse_act_text`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    ExpectedDomain,
    ExpectedIntent,
    ExpectedSlot,
    /// Part of a triplet cut short by a new domain token.
    Aborted,
    /// Part of a triplet still incomplete at the end of input.
    Incomplete,
    /// Part of a triplet identical to an earlier one.
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discard {
    pub position: usize,
    pub token: String,
    pub reason: DiscardReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub triplets: Vec<AtomicAct>,
    /// Sorted by position.
    pub discarded: Vec<Discard>,
    pub terminated_by_end: bool,
}

#[derive(Default)]
struct Partial {
    /// (position, token) pairs consumed so far.
    consumed: Vec<(usize, String)>,
}

impl Partial {
    fn drain_into(&mut self, discarded: &mut Vec<Discard>, reason: DiscardReason) {
        for (position, token) in self.consumed.drain(..) {
            discarded.push(Discard { position, token, reason });
        }
    }
}

/// Greedy domain → intent → slot scan.
///
/// A token that does not fit the expected position is discarded and the scan
/// keeps its place, except that a domain token arriving mid-triplet abandons
/// the partial triplet and starts a new one. Scanning stops at `[end]`.
pub fn parse_act_text<S: AsRef<str>>(tokens: &[S], schema: &Schema) -> ParseReport {
    let mut report = ParseReport::default();
    let mut partial = Partial::default();

    for (pos, tok) in tokens.iter().enumerate() {
        let tok = tok.as_ref();
        if tok == END {
            report.terminated_by_end = true;
            break;
        }
        let discard = |reason| Discard {
            position: pos,
            token: tok.to_string(),
            reason,
        };
        match partial.consumed.len() {
            0 => {
                if schema.is_domain(tok) {
                    partial.consumed.push((pos, tok.to_string()));
                } else {
                    report.discarded.push(discard(DiscardReason::ExpectedDomain));
                }
            }
            1 => {
                if schema.is_intent(tok) {
                    partial.consumed.push((pos, tok.to_string()));
                } else if schema.is_domain(tok) {
                    partial.drain_into(&mut report.discarded, DiscardReason::Aborted);
                    partial.consumed.push((pos, tok.to_string()));
                } else {
                    report.discarded.push(discard(DiscardReason::ExpectedIntent));
                }
            }
            _ => {
                let domain = &partial.consumed[0].1;
                if schema.is_slot(domain, tok) {
                    let act = AtomicAct::new(domain, &partial.consumed[1].1, tok);
                    if report.triplets.contains(&act) {
                        partial.consumed.push((pos, tok.to_string()));
                        partial.drain_into(&mut report.discarded, DiscardReason::Duplicate);
                    } else {
                        partial.consumed.clear();
                        report.triplets.push(act);
                    }
                } else if schema.is_domain(tok) {
                    partial.drain_into(&mut report.discarded, DiscardReason::Aborted);
                    partial.consumed.push((pos, tok.to_string()));
                } else {
                    report.discarded.push(discard(DiscardReason::ExpectedSlot));
                }
            }
        }
    }
    partial.drain_into(&mut report.discarded, DiscardReason::Incomplete);
    report.discarded.sort_by_key(|d| d.position);
    report
}

/// Attaches values: `?` for requests, the first matching entity's value for
/// informs (or `none`), and `none` for every other intent.
pub fn populate_values(triplets: &[AtomicAct], db: &Database, belief: &BeliefState) -> DialogueAct {
    triplets
        .iter()
        .map(|t| {
            let value = if t.is_request() {
                REQUEST_VALUE.to_string()
            } else if t.is_inform() {
                db.query(&t.domain, &belief.constraints(&t.domain))
                    .first()
                    .and_then(|e| e.get(&t.slot))
                    .unwrap_or(NONE_VALUE)
                    .to_string()
            } else {
                NONE_VALUE.to_string()
            };
            Quadruple::new(&t.domain, &t.intent, &t.slot, value)
        })
        .collect()
}

/// Decoder target for an act: `D I S` per quadruple followed by `[end]`.
pub fn linearize_target(act: &DialogueAct, schema: &Schema) -> Result<Vec<String>> {
    let mut out = crate::text::linearize_acts(&act.triplets(), schema)?;
    out.push(END.to_string());
    Ok(out)
}

/// Inverse of [`crate::text::linearize_belief`]: consecutive tokens that are
/// not a domain or slot name join into one value.
pub fn parse_belief_text<S: AsRef<str>>(tokens: &[S], schema: &Schema) -> Option<BeliefState> {
    let mut triplets = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let domain = tokens[i].as_ref();
        let slot = tokens.get(i + 1)?.as_ref();
        if !schema.is_slot(domain, slot) {
            return None;
        }
        i += 2;
        let start = i;
        while i < tokens.len() {
            let t = tokens[i].as_ref();
            let next_is_slot = tokens
                .get(i + 1)
                .is_some_and(|n| schema.is_slot(t, n.as_ref()));
            if next_is_slot {
                break;
            }
            i += 1;
        }
        if i == start {
            return None;
        }
        let value = tokens[start..i]
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(" ");
        triplets.push(BeliefTriplet::new(domain, slot, value));
    }
    Some(BeliefState::new(triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::linearize_belief;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn parses_reference_text() {
        let s = Schema::toy();
        let r = parse_act_text(&toks("hotel inform price hotel request name"), &s);
        assert_eq!(
            r.triplets,
            vec![
                AtomicAct::new("hotel", "inform", "price"),
                AtomicAct::new("hotel", "request", "name")
            ]
        );
        assert!(r.discarded.is_empty());
        assert!(!r.terminated_by_end);
    }

    #[test]
    fn empty_inputs() {
        let s = Schema::toy();
        let r = parse_act_text::<&str>(&[], &s);
        assert!(r.triplets.is_empty() && r.discarded.is_empty());
        let r = parse_act_text(&["[end]"], &s);
        assert!(r.triplets.is_empty());
        assert!(r.terminated_by_end);
    }

    #[test]
    fn misordered_triplet_is_dropped() {
        let s = Schema::toy();
        let r = parse_act_text(&toks("hotel price inform"), &s);
        assert!(r.triplets.is_empty());
        let got: Vec<_> = r.discarded.iter().map(|d| (d.position, d.reason)).collect();
        assert_eq!(
            got,
            vec![
                (0, DiscardReason::Incomplete),
                (1, DiscardReason::ExpectedIntent),
                (2, DiscardReason::Incomplete),
            ]
        );
    }

    #[test]
    fn new_domain_aborts_partial() {
        let s = Schema::toy();
        let r = parse_act_text(&toks("hotel inform restaurant request phone"), &s);
        assert_eq!(r.triplets, vec![AtomicAct::new("restaurant", "request", "phone")]);
        assert_eq!(r.discarded.len(), 2);
        assert!(r.discarded.iter().all(|d| d.reason == DiscardReason::Aborted));
    }

    #[test]
    fn noise_is_skipped_and_duplicates_dropped() {
        let s = Schema::toy();
        let r = parse_act_text(
            &toks("north hotel inform cheap phone hotel inform phone [end] hotel inform name"),
            &s,
        );
        assert_eq!(r.triplets, vec![AtomicAct::new("hotel", "inform", "phone")]);
        assert!(r.terminated_by_end);
        let reasons: Vec<_> = r.discarded.iter().map(|d| d.reason).collect();
        assert_eq!(
            reasons,
            vec![
                DiscardReason::ExpectedDomain,
                DiscardReason::ExpectedSlot,
                DiscardReason::Duplicate,
                DiscardReason::Duplicate,
                DiscardReason::Duplicate,
            ]
        );
    }

    #[test]
    fn slot_must_belong_to_domain() {
        let s = Schema::toy();
        let r = parse_act_text(&toks("hotel inform food"), &s);
        assert!(r.triplets.is_empty());
    }

    #[test]
    fn populate_uses_first_match() {
        let s = Schema::toy();
        let db = Database::toy(&s);
        let belief = BeliefState::default();
        let act = populate_values(&[AtomicAct::new("hotel", "inform", "price")], &db, &belief);
        assert_eq!(act.quadruples[0].value, "cheap");
        let first = db.entities("hotel")[0].get("price").unwrap();
        assert_eq!(act.quadruples[0].value, first);

        let belief = BeliefState::new(vec![BeliefTriplet::new("hotel", "area", "north")]);
        let act = populate_values(&[AtomicAct::new("hotel", "inform", "name")], &db, &belief);
        assert_eq!(act.quadruples[0].value, "castle inn");

        let act = populate_values(&[AtomicAct::new("hotel", "request", "name")], &db, &belief);
        assert_eq!(act.quadruples[0].value, "?");
    }

    #[test]
    fn populate_without_match_is_none() {
        let s = Schema::toy();
        let db = Database::toy(&s);
        let belief = BeliefState::new(vec![
            BeliefTriplet::new("hotel", "area", "south"),
            BeliefTriplet::new("hotel", "price", "cheap"),
        ]);
        let act = populate_values(
            &[
                AtomicAct::new("hotel", "inform", "price"),
                AtomicAct::new("hotel", "nooffer", "none"),
            ],
            &db,
            &belief,
        );
        assert_eq!(act.quadruples[0].value, "none");
        assert_eq!(act.quadruples[1].value, "none");
    }

    #[test]
    fn target_ends_with_end() {
        let s = Schema::toy();
        let act = DialogueAct::new(vec![Quadruple::new("hotel", "request", "name", "?")]);
        assert_eq!(linearize_target(&act, &s).unwrap().join(" "), "hotel request name [end]");
        assert_eq!(linearize_target(&DialogueAct::empty(), &s).unwrap(), vec!["[end]"]);
    }

    #[test]
    fn belief_parse_back() {
        let s = Schema::toy();
        let b = BeliefState::new(vec![
            BeliefTriplet::new("restaurant", "food", "modern european"),
            BeliefTriplet::new("restaurant", "time", "18:30"),
            BeliefTriplet::new("hotel", "area", "north"),
        ]);
        let text = linearize_belief(&b, &s).unwrap();
        assert_eq!(parse_belief_text(&text, &s), Some(b));
        assert_eq!(parse_belief_text(&["hotel"], &s), None);
    }
}
