//! Fixed-candidate baseline: a classifier over act templates mined from a corpus.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wordact_core::acts::AtomicAct;
use wordact_core::Schema;
use wordact_neural::model::{argmax, sample_index};
use wordact_neural::params::ParamBuilder;
use wordact_neural::{
    CandidateNet, Checkpoint, CriticNet, DecodeMode, ModelConfig, ParamSet, Tape, Var,
};

use crate::error::{Result, RlError};
use crate::policy::{check_vocabulary, Agent, CheckpointHeader, Sampled, StateCodec, StateIds};

/// Default minimum corpus frequency for a template to become a candidate.
pub const DEFAULT_CUTOFF: usize = 2;

/// Canonical form of an act template: sorted, deduplicated triplets.
pub fn canonical(triplets: &[AtomicAct]) -> Vec<AtomicAct> {
    let mut v = triplets.to_vec();
    v.sort();
    v.dedup();
    v
}

/// Act templates ordered by descending corpus frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    templates: Vec<Vec<AtomicAct>>,
}

impl CandidateSet {
    pub fn new(templates: Vec<Vec<AtomicAct>>, schema: &Schema) -> Result<Self> {
        let mut seen = Vec::new();
        for t in templates {
            let t = canonical(&t);
            for a in &t {
                a.validate(schema)?;
            }
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
        if seen.is_empty() {
            return Err(RlError::EmptyCandidates);
        }
        Ok(CandidateSet { templates: seen })
    }

    /// Templates occurring at least `cutoff` times among `acts`.
    pub fn from_acts<'a>(
        acts: impl IntoIterator<Item = &'a [AtomicAct]>,
        cutoff: usize,
        schema: &Schema,
    ) -> Result<Self> {
        let mut freq: BTreeMap<Vec<AtomicAct>, usize> = BTreeMap::new();
        for a in acts {
            *freq.entry(canonical(a)).or_default() += 1;
        }
        let mut kept: Vec<(Vec<AtomicAct>, usize)> = freq.into_iter().filter(|(_, n)| *n >= cutoff).collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::new(kept.into_iter().map(|(t, _)| t).collect(), schema)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn templates(&self) -> &[Vec<AtomicAct>] {
        &self.templates
    }

    pub fn get(&self, k: usize) -> Option<&[AtomicAct]> {
        self.templates.get(k).map(Vec::as_slice)
    }

    pub fn index_of(&self, triplets: &[AtomicAct]) -> Option<usize> {
        let c = canonical(triplets);
        self.templates.iter().position(|t| *t == c)
    }

    pub fn contains(&self, triplets: &[AtomicAct]) -> bool {
        self.index_of(triplets).is_some()
    }
}

/// Classifier policy whose action space is exactly the candidate list.
#[derive(Debug, Clone)]
pub struct CandidatePolicy {
    pub codec: StateCodec,
    pub config: ModelConfig,
    pub candidates: CandidateSet,
    pub net: CandidateNet,
    pub actor: ParamSet,
    pub critic_net: CriticNet,
    pub critic: ParamSet,
}

impl CandidatePolicy {
    pub fn new(schema: Schema, mut config: ModelConfig, candidates: CandidateSet, seed: u64) -> Result<Self> {
        let codec = StateCodec::new(schema, config.max_text_len);
        config.vocab_size = codec.vocab.len();
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor = ParamSet::new();
        let net = CandidateNet::new(
            &mut ParamBuilder {
                set: &mut actor,
                rng: &mut rng,
            },
            &config,
            candidates.len(),
        );
        let mut critic = ParamSet::new();
        let critic_net = CriticNet::new(
            &mut ParamBuilder {
                set: &mut critic,
                rng: &mut rng,
            },
            &config,
        );
        Ok(CandidatePolicy {
            codec,
            config,
            candidates,
            net,
            actor,
            critic_net,
            critic,
        })
    }

    pub fn probabilities(&self, state: &StateIds) -> Result<Vec<f64>> {
        let mut t = Tape::new(&self.actor);
        let lp = self.net.log_probs(&mut t, state)?;
        Ok(t.value(lp).data.iter().map(|v| v.exp()).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = CheckpointHeader::Candidate {
            model: self.config,
            vocabulary: self.codec.vocab.tokens().to_vec(),
            candidates: self.candidates.templates().to_vec(),
        };
        let mut ck = Checkpoint::new(serde_json::to_value(header).expect("header serializes"));
        ck.push_set("actor.", &self.actor);
        ck.push_set("critic.", &self.critic);
        Ok(ck.save(path)?)
    }

    pub fn load(path: &Path, schema: Schema) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let header: CheckpointHeader = serde_json::from_value(ck.config.clone())
            .map_err(|e| RlError::Config(format!("{}: checkpoint header: {e}", path.display())))?;
        let CheckpointHeader::Candidate {
            model,
            vocabulary,
            candidates,
        } = header
        else {
            return Err(RlError::Config(format!("{} is not a candidate policy checkpoint", path.display())));
        };
        let set = CandidateSet::new(candidates, &schema)?;
        let mut policy = CandidatePolicy::new(schema, model, set, 0)?;
        check_vocabulary(&policy.codec, &vocabulary, path)?;
        ck.fill_set("actor.", &mut policy.actor)?;
        ck.fill_set("critic.", &mut policy.critic)?;
        Ok(policy)
    }
}

impl Agent for CandidatePolicy {
    fn codec(&self) -> &StateCodec {
        &self.codec
    }

    fn model_config(&self) -> &ModelConfig {
        &self.config
    }

    fn actor(&self) -> &ParamSet {
        &self.actor
    }

    fn actor_mut(&mut self) -> &mut ParamSet {
        &mut self.actor
    }

    fn critic(&self) -> &ParamSet {
        &self.critic
    }

    fn critic_mut(&mut self) -> &mut ParamSet {
        &mut self.critic
    }

    fn critic_net(&self) -> &CriticNet {
        &self.critic_net
    }

    fn sample(&self, state: &StateIds, mode: DecodeMode, rng: &mut ChaCha8Rng) -> Result<Sampled> {
        let p = self.probabilities(state)?;
        let k = match mode {
            DecodeMode::Greedy => argmax(&p),
            DecodeMode::Sample => sample_index(&p, rng),
        };
        let mut t = Tape::new(&self.actor);
        let lp = self.net.log_probs(&mut t, state)?;
        Ok(Sampled {
            action: vec![k as u32],
            log_prob: t.value(lp).data[k],
            truncated: false,
        })
    }

    fn action_log_prob(&self, t: &mut Tape<'_>, state: &StateIds, action: &[u32]) -> Result<Var> {
        let [k] = action else {
            return Err(RlError::Usage(format!("candidate action must be one index, got {action:?}")));
        };
        if *k as usize >= self.candidates.len() {
            return Err(RlError::Usage(format!("candidate index {k} out of range")));
        }
        let lp = self.net.log_probs(t, state)?;
        let picked = t.pick(lp, &[*k as usize]);
        Ok(picked)
    }

    /// The template at the chosen index; nothing outside the list is expressible.
    fn interpret(&self, action: &[u32]) -> Vec<AtomicAct> {
        match action {
            [k] => self.candidates.get(*k as usize).map(<[AtomicAct]>::to_vec).unwrap_or_default(),
            _ => Vec::new(),
        }
    }

    fn encode_target(&self, triplets: &[AtomicAct]) -> Option<Vec<u32>> {
        self.candidates.index_of(triplets).map(|k| vec![k as u32])
    }
}
