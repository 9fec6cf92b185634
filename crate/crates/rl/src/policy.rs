//! Dialogue policies over the neural networks: state encoding, action
//! generation and interpretation into structured acts.

use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_core::acts::{AtomicAct, BeliefState, DbResultSummary, DialogueAct};
use wordact_core::text::build_state_text;
use wordact_core::{
    linearize_target, parse_act_text, populate_values, Database, DialogueStateText, Observation, ParseReport,
    Schema, Vocabulary,
};
use wordact_neural::{
    Checkpoint, CriticNet, DecodeMode, ModelConfig, ParamSet, PolicyModel, Tape, Var, STATE_TEXTS,
};

use crate::error::{Result, RlError};

pub type StateIds = [Vec<u32>; STATE_TEXTS];

/// Turns observations into the four state texts and their token ids.
#[derive(Debug, Clone)]
pub struct StateCodec {
    pub schema: Schema,
    pub vocab: Vocabulary,
    pub max_text_len: usize,
}

impl StateCodec {
    pub fn new(schema: Schema, max_text_len: usize) -> Self {
        let vocab = Vocabulary::from_schema(&schema);
        StateCodec {
            schema,
            vocab,
            max_text_len,
        }
    }

    /// Texts longer than `max_text_len` keep their leading tokens.
    pub fn encode_parts(
        &self,
        user_act: &DialogueAct,
        system_act: &DialogueAct,
        belief: &BeliefState,
        db: &DbResultSummary,
    ) -> Result<DialogueStateText> {
        let mut st = build_state_text(user_act, system_act, belief, db, &self.schema, &self.vocab)?;
        for ids in &mut st.ids {
            ids.truncate(self.max_text_len);
        }
        Ok(st)
    }

    pub fn encode(&self, obs: &Observation) -> Result<DialogueStateText> {
        self.encode_parts(&obs.user_act, &obs.last_system_act, &obs.belief, &obs.db)
    }
}

/// A sampled action in the agent's own encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    pub action: Vec<u32>,
    pub log_prob: f64,
    pub truncated: bool,
}

/// What the training loops need from a trainable policy.
///
/// An action is a list of ids: decoder tokens for the word-level policy, a
/// single candidate index for the fixed-candidate baseline.
pub trait Agent {
    fn codec(&self) -> &StateCodec;
    fn model_config(&self) -> &ModelConfig;
    fn actor(&self) -> &ParamSet;
    fn actor_mut(&mut self) -> &mut ParamSet;
    fn critic(&self) -> &ParamSet;
    fn critic_mut(&mut self) -> &mut ParamSet;
    fn critic_net(&self) -> &CriticNet;

    fn sample(&self, state: &StateIds, mode: DecodeMode, rng: &mut ChaCha8Rng) -> Result<Sampled>;

    /// log π(action | state) as a 1×1 node on a tape over [`Agent::actor`].
    fn action_log_prob(&self, t: &mut Tape<'_>, state: &StateIds, action: &[u32]) -> Result<Var>;

    /// Triplets the action denotes.
    fn interpret(&self, action: &[u32]) -> Vec<AtomicAct>;

    /// Supervised target for an expert act; `None` if the agent cannot express it.
    fn encode_target(&self, triplets: &[AtomicAct]) -> Option<Vec<u32>>;

    fn value(&self, state: &StateIds) -> Result<f64> {
        let mut t = Tape::new(self.critic());
        let v = self.critic_net().value_of(&mut t, state)?;
        Ok(t.value(v).item())
    }

    fn score(&self, state: &StateIds, action: &[u32]) -> Result<f64> {
        let mut t = Tape::new(self.actor());
        let v = self.action_log_prob(&mut t, state, action)?;
        Ok(t.value(v).item())
    }

    /// Full decision for an observation, values filled from the database.
    fn decide(&self, obs: &Observation, db: &Database, mode: DecodeMode, rng: &mut ChaCha8Rng) -> Result<Decision> {
        let state = self.codec().encode(obs)?;
        let sampled = self.sample(&state.ids, mode, rng)?;
        let triplets = self.interpret(&sampled.action);
        let act = populate_values(&triplets, db, &obs.belief);
        Ok(Decision { act, sampled, state })
    }
}

/// Output of [`Agent::decide`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub act: DialogueAct,
    pub sampled: Sampled,
    pub state: DialogueStateText,
}

/// Decision of the word-level policy with the interpreter report.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub act: DialogueAct,
    pub tokens: Vec<String>,
    pub token_ids: Vec<u32>,
    pub log_prob: f64,
    pub truncated: bool,
    pub parse: ParseReport,
    pub state_snapshot: DialogueStateText,
}

/// The word-level policy: generates `D I S ... [end]` and interprets it.
#[derive(Debug, Clone)]
pub struct WordPolicy {
    pub codec: StateCodec,
    pub model: PolicyModel,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub(crate) enum CheckpointHeader {
    Word {
        model: ModelConfig,
        vocabulary: Vec<String>,
    },
    Candidate {
        model: ModelConfig,
        vocabulary: Vec<String>,
        candidates: Vec<Vec<AtomicAct>>,
    },
}

impl WordPolicy {
    pub fn new(schema: Schema, mut config: ModelConfig, seed: u64) -> Result<Self> {
        let codec = StateCodec::new(schema, config.max_text_len);
        config.vocab_size = codec.vocab.len();
        Ok(WordPolicy {
            codec,
            model: PolicyModel::new(config, seed)?,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.codec.schema
    }

    pub fn act(
        &self,
        user_act: &DialogueAct,
        last_system_act: &DialogueAct,
        belief: &BeliefState,
        db: &Database,
        rng: &mut ChaCha8Rng,
        mode: DecodeMode,
    ) -> Result<PolicyDecision> {
        let summary = db.match_counts(belief);
        let state = self.codec.encode_parts(user_act, last_system_act, belief, &summary)?;
        let generated = self.model.generate(&state.ids, mode, rng)?;
        let tokens = self.codec.vocab.decode(&generated.tokens);
        let parse = parse_act_text(&tokens, self.schema());
        let act = populate_values(&parse.triplets, db, belief);
        Ok(PolicyDecision {
            act,
            tokens,
            token_ids: generated.tokens,
            log_prob: generated.log_prob,
            truncated: generated.truncated,
            parse,
            state_snapshot: state,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader::Word {
            model: self.model.config,
            vocabulary: self.codec.vocab.tokens().to_vec(),
        };
        let mut ck = Checkpoint::new(serde_json::to_value(header).expect("header serializes"));
        ck.push_set("actor.", &self.model.actor);
        ck.push_set("critic.", &self.model.critic);
        Ok(ck.save(path)?)
    }

    pub fn load(path: &Path, schema: Schema) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let header: CheckpointHeader = serde_json::from_value(ck.config.clone())
            .map_err(|e| RlError::Config(format!("{}: checkpoint header: {e}", path.display())))?;
        let CheckpointHeader::Word { model, vocabulary } = header else {
            return Err(RlError::Config(format!("{} is not a word-level policy checkpoint", path.display())));
        };
        let mut policy = WordPolicy::new(schema, model, 0)?;
        check_vocabulary(&policy.codec, &vocabulary, path)?;
        ck.fill_set("actor.", &mut policy.model.actor)?;
        ck.fill_set("critic.", &mut policy.model.critic)?;
        Ok(policy)
    }
}

pub(crate) fn check_vocabulary(codec: &StateCodec, stored: &[String], path: &Path) -> Result<()> {
    if codec.vocab.tokens() != stored {
        return Err(RlError::Config(format!(
            "{}: checkpoint vocabulary does not match the schema",
            path.display()
        )));
    }
    Ok(())
}

impl Agent for WordPolicy {
    fn codec(&self) -> &StateCodec {
        &self.codec
    }

    fn model_config(&self) -> &ModelConfig {
        &self.model.config
    }

    fn actor(&self) -> &ParamSet {
        &self.model.actor
    }

    fn actor_mut(&mut self) -> &mut ParamSet {
        &mut self.model.actor
    }

    fn critic(&self) -> &ParamSet {
        &self.model.critic
    }

    fn critic_mut(&mut self) -> &mut ParamSet {
        &mut self.model.critic
    }

    fn critic_net(&self) -> &CriticNet {
        &self.model.critic_net
    }

    fn sample(&self, state: &StateIds, mode: DecodeMode, rng: &mut ChaCha8Rng) -> Result<Sampled> {
        let g = self.model.generate(state, mode, rng)?;
        Ok(Sampled {
            action: g.tokens,
            log_prob: g.log_prob,
            truncated: g.truncated,
        })
    }

    fn action_log_prob(&self, t: &mut Tape<'_>, state: &StateIds, action: &[u32]) -> Result<Var> {
        let s = self.model.actor_net.encode_state(t, state)?;
        Ok(self.model.actor_net.sequence_logprob(t, s, action)?)
    }

    fn interpret(&self, action: &[u32]) -> Vec<AtomicAct> {
        let tokens = self.codec.vocab.decode(action);
        parse_act_text(&tokens, self.schema()).triplets
    }

    fn encode_target(&self, triplets: &[AtomicAct]) -> Option<Vec<u32>> {
        let act: DialogueAct = triplets
            .iter()
            .map(|a| wordact_core::Quadruple::new(&a.domain, &a.intent, &a.slot, "none"))
            .collect();
        let text = linearize_target(&act, self.schema()).ok()?;
        if text.len() > self.model.config.max_decode_len {
            return None;
        }
        Some(self.codec.vocab.encode(&text))
    }
}

/// A checkpoint of either policy family.
#[derive(Debug, Clone)]
pub enum AnyPolicy {
    Word(WordPolicy),
    Candidate(crate::candidate::CandidatePolicy),
}

impl AnyPolicy {
    /// Loads whichever policy kind the checkpoint header names.
    pub fn load(path: &Path, schema: Schema) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let header: CheckpointHeader = serde_json::from_value(ck.config)
            .map_err(|e| RlError::Config(format!("{}: checkpoint header: {e}", path.display())))?;
        Ok(match header {
            CheckpointHeader::Word { .. } => AnyPolicy::Word(WordPolicy::load(path, schema)?),
            CheckpointHeader::Candidate { .. } => {
                AnyPolicy::Candidate(crate::candidate::CandidatePolicy::load(path, schema)?)
            }
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            AnyPolicy::Word(p) => p.save(path),
            AnyPolicy::Candidate(p) => p.save(path),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AnyPolicy::Word(_) => "word",
            AnyPolicy::Candidate(_) => "candidate",
        }
    }

    pub fn agent(&self) -> &dyn Agent {
        match self {
            AnyPolicy::Word(p) => p,
            AnyPolicy::Candidate(p) => p,
        }
    }

    pub fn agent_mut(&mut self) -> &mut dyn Agent {
        match self {
            AnyPolicy::Word(p) => p,
            AnyPolicy::Candidate(p) => p,
        }
    }
}
