//! Linearization of the dialogue state into four token sequences, and the
//! token vocabulary shared by the encoders and the decoder.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::acts::{AtomicAct, BeliefState, DbResultSummary, DialogueAct};
use crate::error::Result;
use crate::schema::Schema;

pub const PAD: &str = "[pad]";
pub const UNK: &str = "[unk]";
pub const CLS: &str = "[cls]";
pub const START: &str = "[start]";
pub const END: &str = "[end]";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const START_ID: u32 = 3;
pub const END_ID: u32 = 4;

const SPECIALS: [&str; 5] = [PAD, UNK, CLS, START, END];

/// Largest match count emitted literally; larger counts become `10+`.
pub const DB_COUNT_CAP: usize = 10;

/// Token for a database match count.
pub fn count_token(count: usize) -> String {
    if count >= DB_COUNT_CAP {
        format!("{DB_COUNT_CAP}+")
    } else {
        count.to_string()
    }
}

/// Token-to-id map: specials first, then every schema token in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_schema(schema: &Schema) -> Self {
        let mut rest: BTreeSet<String> = BTreeSet::new();
        rest.extend(schema.domains.iter().cloned());
        rest.extend(schema.intents.iter().cloned());
        for slots in schema.slots.values() {
            for (slot, values) in slots {
                rest.insert(slot.clone());
                for v in values {
                    rest.extend(v.split_whitespace().map(str::to_string));
                }
            }
        }
        for c in 0..=DB_COUNT_CAP {
            rest.insert(count_token(c));
        }
        for s in SPECIALS {
            rest.remove(s);
        }
        let tokens: Vec<String> = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(rest)
            .collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or the unknown id.
    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// `D1 I1 S1 ... Dn In Sn` for a list of atomic acts.
pub fn linearize_acts(acts: &[AtomicAct], schema: &Schema) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(acts.len() * 3);
    for a in acts {
        a.validate(schema)?;
        out.push(a.domain.clone());
        out.push(a.intent.clone());
        out.push(a.slot.clone());
    }
    Ok(out)
}

/// `D1 S1 V1 ...`; multi-word values contribute one token per word.
pub fn linearize_belief(belief: &BeliefState, schema: &Schema) -> Result<Vec<String>> {
    belief.validate(schema)?;
    let mut out = Vec::with_capacity(belief.triplets.len() * 3);
    for t in &belief.triplets {
        out.push(t.domain.clone());
        out.push(t.slot.clone());
        out.extend(t.value.split_whitespace().map(str::to_string));
    }
    Ok(out)
}

/// `D1 Q1 ...` with counts of ten or more bucketed to `10+`.
pub fn linearize_db(summary: &DbResultSummary) -> Vec<String> {
    summary
        .counts
        .iter()
        .flat_map(|(d, c)| [d.clone(), count_token(*c)])
        .collect()
}

/// The four linearized state texts with their token ids (no classifier prefix).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueStateText {
    pub user_act_text: Vec<String>,
    pub system_act_text: Vec<String>,
    pub belief_text: Vec<String>,
    pub db_text: Vec<String>,
    pub ids: [Vec<u32>; 4],
}

impl DialogueStateText {
    pub fn texts(&self) -> [&[String]; 4] {
        [
            &self.user_act_text,
            &self.system_act_text,
            &self.belief_text,
            &self.db_text,
        ]
    }
}

pub fn build_state_text(
    user_act: &DialogueAct,
    system_act: &DialogueAct,
    belief: &BeliefState,
    db: &DbResultSummary,
    schema: &Schema,
    vocab: &Vocabulary,
) -> Result<DialogueStateText> {
    db.validate(schema)?;
    let user_act_text = linearize_acts(&user_act.triplets(), schema)?;
    let system_act_text = linearize_acts(&system_act.triplets(), schema)?;
    let belief_text = linearize_belief(belief, schema)?;
    let db_text = linearize_db(db);
    let ids = [
        vocab.encode(&user_act_text),
        vocab.encode(&system_act_text),
        vocab.encode(&belief_text),
        vocab.encode(&db_text),
    ];
    Ok(DialogueStateText {
        user_act_text,
        system_act_text,
        belief_text,
        db_text,
        ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acts::{BeliefTriplet, Quadruple};

    fn hotel_schema() -> Schema {
        Schema::toy()
    }

    #[test]
    fn acts_linearize_in_order() {
        let s = hotel_schema();
        let acts = [
            AtomicAct::new("hotel", "inform", "price"),
            AtomicAct::new("hotel", "request", "name"),
        ];
        assert_eq!(
            linearize_acts(&acts, &s).unwrap().join(" "),
            "hotel inform price hotel request name"
        );
        assert!(linearize_acts(&[], &s).unwrap().is_empty());
    }

    #[test]
    fn invalid_act_names_field() {
        let s = hotel_schema();
        let err = linearize_acts(&[AtomicAct::new("hotel", "greet", "price")], &s).unwrap_err();
        assert!(err.to_string().starts_with("invalid intent"), "{err}");
    }

    #[test]
    fn belief_linearizes_and_splits_values() {
        let s = hotel_schema();
        let b = BeliefState::new(vec![
            BeliefTriplet::new("hotel", "price", "expensive"),
            BeliefTriplet::new("hotel", "area", "north"),
        ]);
        assert_eq!(
            linearize_belief(&b, &s).unwrap().join(" "),
            "hotel price expensive hotel area north"
        );
        let b = BeliefState::new(vec![BeliefTriplet::new("restaurant", "food", "modern european")]);
        assert_eq!(
            linearize_belief(&b, &s).unwrap(),
            vec!["restaurant", "food", "modern", "european"]
        );
    }

    #[test]
    fn db_counts_bucket_at_ten() {
        let d = DbResultSummary::new(vec![("hotel".into(), 4), ("restaurant".into(), 2)]);
        assert_eq!(linearize_db(&d).join(" "), "hotel 4 restaurant 2");
        let d = DbResultSummary::new(vec![("train".into(), 13)]);
        assert_eq!(linearize_db(&d).join(" "), "train 10+");
        for c in 0..30 {
            let t = count_token(c);
            assert_eq!(t == "10+", c >= 10);
        }
        assert!(linearize_db(&DbResultSummary::default()).is_empty());
    }

    #[test]
    fn vocabulary_layout() {
        let s = hotel_schema();
        let v = Vocabulary::from_schema(&s);
        assert_eq!(v.id(PAD), PAD_ID);
        assert_eq!(v.id(UNK), UNK_ID);
        assert_eq!(v.id(CLS), CLS_ID);
        assert_eq!(v.id(START), START_ID);
        assert_eq!(v.id(END), END_ID);
        let rest = &v.tokens()[5..];
        assert!(rest.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(v.id("no-such-token"), UNK_ID);
        assert!(v.get("10+").is_some());
        assert!(v.get("european").is_some());
    }

    #[test]
    fn state_text_first_turn() {
        let s = hotel_schema();
        let v = Vocabulary::from_schema(&s);
        let user = DialogueAct::new(vec![Quadruple::new("hotel", "inform", "area", "north")]);
        let st = build_state_text(
            &user,
            &DialogueAct::empty(),
            &BeliefState::default(),
            &DbResultSummary::default(),
            &s,
            &v,
        )
        .unwrap();
        assert_eq!(st.user_act_text, vec!["hotel", "inform", "area"]);
        assert!(st.system_act_text.is_empty());
        assert!(st.ids[1].is_empty());
        assert!(st.ids[0].iter().all(|&i| i != UNK_ID));

        let empty = build_state_text(
            &DialogueAct::empty(),
            &DialogueAct::empty(),
            &BeliefState::default(),
            &DbResultSummary::default(),
            &s,
            &v,
        )
        .unwrap();
        assert!(empty.texts().iter().all(|t| t.is_empty()));
    }
}
