use std::collections::BTreeSet;

use proptest::prelude::*;
use wordact_core::acts::{AtomicAct, BeliefState, BeliefTriplet, DbResultSummary, DialogueAct, Quadruple};
use wordact_core::grammar::{parse_belief_text, DiscardReason};
use wordact_core::text::{build_state_text, linearize_acts, Vocabulary, END};
use wordact_core::{linearize_target, parse_act_text, Schema};

fn all_triplets(schema: &Schema) -> Vec<AtomicAct> {
    let mut out = Vec::new();
    for d in &schema.domains {
        for i in &schema.intents {
            for s in schema.slot_names(d) {
                out.push(AtomicAct::new(d, i, s));
            }
        }
    }
    out
}

/// Independent restatement of the interpreter used as a reference: returns the
/// accepted triplets and the set of discarded positions.
fn reference_parse(tokens: &[&str], schema: &Schema) -> (Vec<AtomicAct>, BTreeSet<usize>) {
    let mut accepted = Vec::new();
    let mut dropped = BTreeSet::new();
    let mut pending: Vec<usize> = Vec::new();
    for (p, tok) in tokens.iter().enumerate() {
        if *tok == END {
            break;
        }
        let fits = match pending.len() {
            0 => schema.is_domain(tok),
            1 => schema.intents.contains(*tok),
            _ => schema.is_slot(tokens[pending[0]], tok),
        };
        if fits {
            pending.push(p);
            if pending.len() == 3 {
                let t = AtomicAct::new(tokens[pending[0]], tokens[pending[1]], tokens[pending[2]]);
                if accepted.contains(&t) {
                    dropped.extend(pending.iter().copied());
                } else {
                    accepted.push(t);
                }
                pending.clear();
            }
        } else if !pending.is_empty() && schema.is_domain(tok) {
            dropped.extend(pending.drain(..));
            pending.push(p);
        } else {
            dropped.insert(p);
        }
    }
    dropped.extend(pending);
    (accepted, dropped)
}

fn two_domain_schema() -> Schema {
    let text = r#"{
      "domains": ["flight", "hotel"],
      "intents": ["inform", "request"],
      "slots": {
        "flight": {"day": ["monday"], "time": ["noon"]},
        "hotel": {"area": ["north"], "day": ["monday"]}
      },
      "requestable": {"flight": ["time"], "hotel": ["area"]},
      "informable": {"flight": ["day"], "hotel": ["day"]},
      "goal_slot_weights": {"flight": {"day": 1.0}, "hotel": {"day": 1.0}}
    }"#;
    Schema::from_json_str(text, "two.json").unwrap()
}

#[test]
fn matches_reference_on_all_three_token_strings() {
    let schema = two_domain_schema();
    let alphabet = ["flight", "hotel", "inform", "request", "day", "time", "area", "north", END];
    let mut n = 0;
    for a in alphabet {
        for b in alphabet {
            for c in alphabet {
                let toks = [a, b, c];
                let report = parse_act_text(&toks, &schema);
                let (want, dropped) = reference_parse(&toks, &schema);
                assert_eq!(report.triplets, want, "{toks:?}");
                let got: BTreeSet<usize> = report.discarded.iter().map(|d| d.position).collect();
                assert_eq!(got, dropped, "{toks:?}");
                n += 1;
            }
        }
    }
    assert_eq!(n, 729);
}

#[test]
fn misordered_example_hand_trace() {
    let schema = Schema::toy();
    let toks = ["hotel", "price", "inform"];
    let r = parse_act_text(&toks, &schema);
    assert!(r.triplets.is_empty());
    let (want, dropped) = reference_parse(&toks, &schema);
    assert!(want.is_empty());
    assert_eq!(dropped, BTreeSet::from([0, 1, 2]));
    assert_eq!(r.discarded[1].reason, DiscardReason::ExpectedIntent);
}

#[test]
fn exhaustive_single_and_double_round_trip() {
    let schema = Schema::toy();
    let all = all_triplets(&schema);
    assert_eq!(all.len(), 4 * (8 + 9));
    let mut checked = 0;
    for a in &all {
        let text = linearize_acts(std::slice::from_ref(a), &schema).unwrap();
        assert_eq!(parse_act_text(&text, &schema).triplets, vec![a.clone()]);
        let act = DialogueAct::new(vec![Quadruple::new(&a.domain, &a.intent, &a.slot, "?")]);
        let target = linearize_target(&act, &schema).unwrap();
        let r = parse_act_text(&target, &schema);
        assert_eq!(r.triplets, act.triplets());
        assert!(r.terminated_by_end && r.discarded.is_empty());
        for b in &all {
            if a == b {
                continue;
            }
            let pair = [a.clone(), b.clone()];
            let text = linearize_acts(&pair, &schema).unwrap();
            assert_eq!(parse_act_text(&text, &schema).triplets, pair.to_vec());
            checked += 1;
        }
    }
    assert_eq!(checked, all.len() * (all.len() - 1));
}

fn token_pool(schema: &Schema) -> Vec<String> {
    let vocab = Vocabulary::from_schema(schema);
    let mut pool: Vec<String> = vocab.tokens().to_vec();
    pool.push("garbage".into());
    pool
}

proptest! {
    #[test]
    fn fuzz_output_is_schema_valid(idx in prop::collection::vec(0usize..200, 0..40)) {
        let schema = Schema::toy();
        let pool = token_pool(&schema);
        let toks: Vec<&str> = idx.iter().map(|i| pool[i % pool.len()].as_str()).collect();
        let r = parse_act_text(&toks, &schema);
        for t in &r.triplets {
            prop_assert!(t.validate(&schema).is_ok());
        }
        prop_assert!(r.triplets.len() <= toks.len() / 3);
        prop_assert!(r.discarded.windows(2).all(|w| w[0].position < w[1].position));
        let consumed = toks.iter().position(|t| *t == END).unwrap_or(toks.len());
        prop_assert_eq!(r.discarded.len() + 3 * r.triplets.len(), consumed);
    }

    #[test]
    fn distinct_triplet_lists_round_trip(picks in prop::collection::btree_set(0usize..68, 0..6), shuffle in any::<u64>()) {
        let schema = Schema::toy();
        let all = all_triplets(&schema);
        let mut list: Vec<AtomicAct> = picks.iter().map(|&i| all[i].clone()).collect();
        let k = list.len().max(1);
        list.rotate_left((shuffle as usize) % k);
        let text = linearize_acts(&list, &schema).unwrap();
        prop_assert_eq!(text.len(), 3 * list.len());
        prop_assert_eq!(parse_act_text(&text, &schema).triplets, list);
    }

    #[test]
    fn state_text_round_trips(
        user in prop::collection::btree_set(0usize..68, 0..4),
        sys in prop::collection::btree_set(0usize..68, 0..4),
        belief_picks in prop::collection::btree_set((0usize..2, 0usize..8, 0usize..3), 0..5),
        counts in prop::collection::vec(0usize..20, 0..2),
    ) {
        let schema = Schema::toy();
        let vocab = Vocabulary::from_schema(&schema);
        let all = all_triplets(&schema);
        let to_act = |s: &std::collections::BTreeSet<usize>| -> DialogueAct {
            s.iter().map(|&i| {
                let a = &all[i];
                let v = if a.intent == "request" { "?" } else { "none" };
                Quadruple::new(&a.domain, &a.intent, &a.slot, v)
            }).collect()
        };
        let user_act = to_act(&user);
        let sys_act = to_act(&sys);
        let mut belief = BeliefState::default();
        let domains: Vec<&String> = schema.domains.iter().collect();
        for (d, s, v) in belief_picks {
            let d = domains[d];
            let inf: Vec<&String> = schema.informable[d].iter().collect();
            let slot = inf[s % inf.len()];
            let values = schema.values(d, slot).unwrap();
            belief.set(d, slot, &values[v % values.len()]);
        }
        let db = DbResultSummary::new(
            domains.iter().zip(&counts).map(|(d, c)| (d.to_string(), *c)).collect(),
        );
        let st = build_state_text(&user_act, &sys_act, &belief, &db, &schema, &vocab).unwrap();
        let again = build_state_text(&user_act, &sys_act, &belief, &db, &schema, &vocab).unwrap();
        prop_assert_eq!(&st, &again);
        prop_assert_eq!(parse_act_text(&st.user_act_text, &schema).triplets, user_act.triplets());
        prop_assert_eq!(parse_act_text(&st.system_act_text, &schema).triplets, sys_act.triplets());
        prop_assert_eq!(parse_belief_text(&st.belief_text, &schema), Some(belief));
        prop_assert_eq!(st.db_text.len(), 2 * db.counts.len());
        for ids in &st.ids {
            prop_assert!(ids.iter().all(|&i| (i as usize) < vocab.len() && i != 1));
        }
    }
}

#[test]
fn belief_text_with_multiword_values() {
    let schema = Schema::toy();
    let b = BeliefState::new(vec![
        BeliefTriplet::new("restaurant", "food", "modern european"),
        BeliefTriplet::new("restaurant", "area", "north"),
    ]);
    let text = wordact_core::text::linearize_belief(&b, &schema).unwrap();
    assert_eq!(text.len(), 7);
    assert_eq!(parse_belief_text(&text, &schema), Some(b));
}
