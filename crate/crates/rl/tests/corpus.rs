mod common;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use common::{env, tiny, word_policy};
use wordact_core::acts::AtomicAct;
use wordact_core::{linearize_target, parse_act_text};
use wordact_rl::corpus::{read_jsonl, write_jsonl};
use wordact_rl::{
    generate_expert_data, to_examples, CandidatePolicy, CandidateSet, ExpertDataConfig, RlError,
};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn corpus(n: usize, seed: u64) -> Vec<wordact_rl::ExpertRecord> {
    generate_expert_data(&env(), n, seed, &ExpertDataConfig::default()).unwrap()
}

#[test]
fn zero_turns_give_an_empty_corpus() {
    assert!(corpus(0, 1).is_empty());
}

#[test]
fn generation_is_deterministic_and_sized() {
    let a = corpus(300, 7);
    assert_eq!(a.len(), 300);
    assert_eq!(a, corpus(300, 7));
    assert_ne!(a, corpus(300, 8));
}

#[test]
fn first_record_matches_golden_file() {
    let first = serde_json::to_string_pretty(&corpus(1, 11)[0]).unwrap();
    let path = golden("corpus_seed11_first.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &first).unwrap();
    }
    assert_eq!(first, std::fs::read_to_string(path).unwrap());
}

#[test]
fn targets_round_trip_through_the_grammar() {
    let schema = env().schema().clone();
    for r in corpus(500, 3) {
        let triplets = r.target_triplets();
        let text = linearize_target(&r.target_act, &schema).unwrap();
        let report = parse_act_text(&text, &schema);
        assert_eq!(report.triplets, triplets);
        assert!(report.discarded.is_empty());
    }
}

#[test]
fn jsonl_round_trip_and_line_numbers_in_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let records = corpus(40, 2);
    write_jsonl(&path, &records).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), records);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{\"user_act\": 3}";
    std::fs::write(&path, lines.join("\n")).unwrap();
    match read_jsonl(&path).unwrap_err() {
        RlError::Corpus { line, .. } => assert_eq!(line, 3),
        e => panic!("unexpected {e}"),
    }
}

fn composite() -> Vec<AtomicAct> {
    ["address", "phone", "postcode"]
        .iter()
        .map(|s| AtomicAct::new("hotel", "inform", *s))
        .collect()
}

#[test]
fn excluded_templates_never_appear() {
    let opts = ExpertDataConfig {
        exclude: vec![composite()],
    };
    let with = generate_expert_data(&env(), 2000, 11, &ExpertDataConfig::default()).unwrap();
    let without = generate_expert_data(&env(), 2000, 11, &opts).unwrap();
    let is_composite = |r: &wordact_rl::ExpertRecord| wordact_rl::canonical(&r.target_triplets()) == composite();
    assert!(with.iter().any(is_composite), "the composite should occur naturally");
    assert!(!without.iter().any(is_composite));
    assert_eq!(without.len(), 2000);
}

#[test]
fn candidate_count_is_pinned() {
    let schema = env().schema().clone();
    let records = corpus(2000, 11);
    let acts: Vec<Vec<AtomicAct>> = records.iter().map(|r| r.target_triplets()).collect();
    // Independent count: distinct sorted "d i s" string sets.
    let mut freq: BTreeMap<Vec<String>, usize> = BTreeMap::new();
    for a in &acts {
        let mut key: Vec<String> = a.iter().map(|t| format!("{} {} {}", t.domain, t.intent, t.slot)).collect();
        key.sort();
        key.dedup();
        *freq.entry(key).or_default() += 1;
    }
    let all = CandidateSet::from_acts(acts.iter().map(Vec::as_slice), 1, &schema).unwrap();
    let frequent = CandidateSet::from_acts(acts.iter().map(Vec::as_slice), 2, &schema).unwrap();
    assert_eq!(all.len(), freq.len());
    assert_eq!(frequent.len(), freq.values().filter(|n| **n >= 2).count());
    assert_eq!(all.len(), 59);
    assert_eq!(frequent.len(), 54);
    // Most frequent first.
    let top = freq.values().max().unwrap();
    let first: Vec<String> = all.get(0).unwrap().iter().map(|t| format!("{} {} {}", t.domain, t.intent, t.slot)).collect();
    assert_eq!(freq[&first], *top);
}

#[test]
fn empty_candidate_lists_are_rejected() {
    let schema = env().schema().clone();
    assert!(matches!(CandidateSet::new(vec![], &schema), Err(RlError::EmptyCandidates)));
    let none: Vec<&[AtomicAct]> = vec![];
    assert!(CandidateSet::from_acts(none, 2, &schema).is_err());
}

#[test]
fn candidate_policy_cannot_express_acts_outside_its_list() {
    let schema = env().schema().clone();
    let records = corpus(400, 5);
    let acts: Vec<Vec<AtomicAct>> = records.iter().map(|r| r.target_triplets()).collect();
    let set = CandidateSet::from_acts(acts.iter().map(Vec::as_slice), 2, &schema).unwrap();
    let policy = CandidatePolicy::new(schema, tiny(), set.clone(), 1).unwrap();
    use wordact_rl::policy::Agent;
    let outside = vec![AtomicAct::new("restaurant", "request", "time"), AtomicAct::new("hotel", "bye", "none")];
    assert!(!set.contains(&outside));
    assert!(policy.encode_target(&outside).is_none());
    let mut seen = HashSet::new();
    for k in 0..set.len() as u32 {
        seen.insert(wordact_rl::canonical(&policy.interpret(&[k])));
    }
    assert!(!seen.contains(&wordact_rl::canonical(&outside)));
    // Only expressible records become examples.
    let examples = to_examples(&policy, &records).unwrap();
    assert!(examples.len() <= records.len());
    assert!(examples.iter().all(|e| set.contains(&e.target)));
}

#[test]
fn word_policy_expresses_every_corpus_act() {
    let agent = word_policy(0);
    let records = corpus(400, 5);
    assert_eq!(to_examples(&agent, &records).unwrap().len(), records.len());
}

#[test]
fn candidate_checkpoint_round_trip() {
    let schema = env().schema().clone();
    let records = corpus(200, 5);
    let acts: Vec<Vec<AtomicAct>> = records.iter().map(|r| r.target_triplets()).collect();
    let set = CandidateSet::from_acts(acts.iter().map(Vec::as_slice), 1, &schema).unwrap();
    let policy = CandidatePolicy::new(schema.clone(), tiny(), set, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cand.ckpt");
    policy.save(&path).unwrap();
    let back = CandidatePolicy::load(&path, schema.clone()).unwrap();
    assert_eq!(back.candidates, policy.candidates);
    assert_eq!(back.actor, policy.actor);
    let examples = to_examples(&policy, &records).unwrap();
    assert_eq!(
        back.probabilities(&examples[0].state).unwrap(),
        policy.probabilities(&examples[0].state).unwrap()
    );
    // A candidate checkpoint is not a word-level one.
    assert!(wordact_rl::WordPolicy::load(&path, schema).is_err());
}
