//! Actor (state encoder plus action encoder-decoder) and critic networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_core::text::{CLS_ID, END_ID, START_ID};

use crate::error::{NeuralError, Result};
use crate::layers::{DecoderLayer, Encoder, LayerNorm, Linear};
use crate::params::{ParamBuilder, ParamId, ParamSet};
use crate::tape::{softmax_in_place, Tape, Var};
use crate::tensor::Mat;

/// Number of state texts: user act, system act, belief, database counts.
pub const STATE_TEXTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub layers: usize,
    pub heads: usize,
    pub ff_size: usize,
    pub max_decode_len: usize,
    /// Longest state text accepted, not counting the classifier token.
    pub max_text_len: usize,
}

impl ModelConfig {
    /// One layer, one head, hidden size 256.
    pub fn reference(vocab_size: usize) -> Self {
        ModelConfig {
            vocab_size,
            hidden_size: 256,
            layers: 1,
            heads: 1,
            ff_size: 1024,
            max_decode_len: 24,
            max_text_len: 64,
        }
    }

    /// Small enough for single-core training runs in minutes.
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig {
            hidden_size: 32,
            ff_size: 64,
            ..Self::reference(vocab_size)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("vocab_size", self.vocab_size),
            ("hidden_size", self.hidden_size),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ff_size", self.ff_size),
            ("max_decode_len", self.max_decode_len),
            ("max_text_len", self.max_text_len),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(NeuralError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.hidden_size % self.heads != 0 {
            return Err(NeuralError::Config(format!(
                "hidden_size {} is not divisible by heads {}",
                self.hidden_size, self.heads
            )));
        }
        if (END_ID as usize) >= self.vocab_size {
            return Err(NeuralError::Config("vocabulary lacks the special tokens".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    Greedy,
    Sample,
}

/// Output of autoregressive generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// Generated ids, including the final end token unless truncated.
    pub tokens: Vec<u32>,
    pub log_prob: f64,
    pub step_log_probs: Vec<f64>,
    pub truncated: bool,
}

/// Embeds the four state texts and returns their classifier outputs plus
/// context embeddings as a 4×d matrix (row `k` is text `k`).
#[derive(Debug, Clone)]
pub struct StateEncoder {
    pub tok_emb: ParamId,
    pub pos_emb: ParamId,
    pub ctx_emb: ParamId,
    pub encoder: Encoder,
    pub max_text_len: usize,
    pub vocab_size: usize,
}

impl StateEncoder {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, name: &str, cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_size;
        let bound = 1.0 / (d as f64).sqrt();
        StateEncoder {
            tok_emb: pb.uniform(&format!("{name}.tok_emb"), cfg.vocab_size, d, bound),
            pos_emb: pb.uniform(&format!("{name}.pos_emb"), cfg.max_text_len + 1, d, bound),
            ctx_emb: pb.uniform(&format!("{name}.ctx_emb"), STATE_TEXTS, d, bound),
            encoder: Encoder::new(pb, &format!("{name}.encoder"), cfg.layers, d, cfg.heads, cfg.ff_size),
            max_text_len: cfg.max_text_len,
            vocab_size: cfg.vocab_size,
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Var> {
        let tok = t.param(self.tok_emb);
        let pos = t.param(self.pos_emb);
        let ctx = t.param(self.ctx_emb);
        let mut rows = Vec::with_capacity(STATE_TEXTS);
        for (k, ids) in texts.iter().enumerate() {
            if ids.len() > self.max_text_len {
                return Err(NeuralError::TooLong {
                    len: ids.len(),
                    max: self.max_text_len,
                });
            }
            let mut seq = Vec::with_capacity(ids.len() + 1);
            seq.push(CLS_ID as usize);
            for &id in ids {
                check_id(id, self.vocab_size)?;
                seq.push(id as usize);
            }
            let positions: Vec<usize> = (0..seq.len()).collect();
            let e = t.gather(tok, &seq);
            let p = t.gather(pos, &positions);
            let x = t.add(e, p);
            let h = self.encoder.forward(t, x);
            let cls = t.slice_rows(h, 0, 1);
            let c = t.gather(ctx, &[k]);
            rows.push(t.add(cls, c));
        }
        Ok(t.concat_rows(&rows))
    }
}

fn check_id(id: u32, vocab: usize) -> Result<()> {
    if (id as usize) < vocab {
        Ok(())
    } else {
        Err(NeuralError::TokenOutOfRange { id, vocab })
    }
}

/// The policy network θ.
#[derive(Debug, Clone)]
pub struct ActorNet {
    pub config: ModelConfig,
    pub state: StateEncoder,
    pub action_encoder: Encoder,
    pub dec_pos_emb: ParamId,
    pub decoder: Vec<DecoderLayer>,
    pub dec_ln: LayerNorm,
    pub out: Linear,
    /// Test hook: replaces the output logits with zeros.
    pub zero_logits: bool,
}

impl ActorNet {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_size;
        let bound = 1.0 / (d as f64).sqrt();
        ActorNet {
            config: *cfg,
            state: StateEncoder::new(pb, "state", cfg),
            action_encoder: Encoder::new(pb, "action_encoder", cfg.layers, d, cfg.heads, cfg.ff_size),
            dec_pos_emb: pb.uniform("decoder.pos_emb", cfg.max_decode_len, d, bound),
            decoder: (0..cfg.layers)
                .map(|i| DecoderLayer::new(pb, &format!("decoder.layer{i}"), d, cfg.heads, cfg.ff_size))
                .collect(),
            dec_ln: LayerNorm::new(pb, "decoder.ln_out", d),
            out: Linear::new(pb, "decoder.out", d, cfg.vocab_size),
            zero_logits: false,
        }
    }

    /// State matrix s, 4×d.
    pub fn encode_state(&self, t: &mut Tape<'_>, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Var> {
        self.state.forward(t, texts)
    }

    /// Encoder output the decoder attends to.
    pub fn memory(&self, t: &mut Tape<'_>, state: Var) -> Var {
        self.action_encoder.forward(t, state)
    }

    /// Next-token logits for every prefix of `inputs` (which starts with the
    /// start token), one row per position.
    pub fn logits(&self, t: &mut Tape<'_>, memory: Var, inputs: &[u32]) -> Result<Var> {
        if inputs.len() > self.config.max_decode_len {
            return Err(NeuralError::TooLong {
                len: inputs.len(),
                max: self.config.max_decode_len,
            });
        }
        if self.zero_logits {
            return Ok(t.constant(Mat::zeros(inputs.len(), self.config.vocab_size)));
        }
        let mut ids = Vec::with_capacity(inputs.len());
        for &id in inputs {
            check_id(id, self.config.vocab_size)?;
            ids.push(id as usize);
        }
        let tok = t.param(self.state.tok_emb);
        let pos = t.param(self.dec_pos_emb);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let e = t.gather(tok, &ids);
        let p = t.gather(pos, &positions);
        let mut x = t.add(e, p);
        for layer in &self.decoder {
            x = layer.forward(t, x, memory);
        }
        let h = self.dec_ln.forward(t, x);
        Ok(self.out.forward(t, h))
    }

    /// Teacher-forced log P(w_i | w_<i, s) for each target token, as an n×1 column.
    pub fn decode_logprobs(&self, t: &mut Tape<'_>, state: Var, targets: &[u32]) -> Result<Var> {
        if targets.is_empty() {
            return Err(NeuralError::Shape("empty target sequence".into()));
        }
        let memory = self.memory(t, state);
        let mut inputs = Vec::with_capacity(targets.len());
        inputs.push(START_ID);
        inputs.extend_from_slice(&targets[..targets.len() - 1]);
        let logits = self.logits(t, memory, &inputs)?;
        let logp = t.log_softmax(logits);
        let cols: Vec<usize> = targets.iter().map(|&w| w as usize).collect();
        for &c in &cols {
            check_id(c as u32, self.config.vocab_size)?;
        }
        Ok(t.pick(logp, &cols))
    }

    /// Sequence log-probability as a 1×1 node.
    pub fn sequence_logprob(&self, t: &mut Tape<'_>, state: Var, targets: &[u32]) -> Result<Var> {
        let steps = self.decode_logprobs(t, state, targets)?;
        Ok(t.sum(steps))
    }

    /// Autoregressive generation from the start token until the end token or
    /// the length cap. Each step re-runs the decoder over the whole prefix.
    pub fn generate<R: Rng>(
        &self,
        t: &mut Tape<'_>,
        state: Var,
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Generated> {
        let memory = self.memory(t, state);
        let mut inputs = vec![START_ID];
        let mut tokens = Vec::new();
        let mut step_log_probs = Vec::new();
        loop {
            let logits = self.logits(t, memory, &inputs)?;
            let lv = t.value(logits);
            let mut probs = lv.row(lv.rows - 1).to_vec();
            softmax_in_place(&mut probs);
            let next = match mode {
                DecodeMode::Greedy => argmax(&probs),
                DecodeMode::Sample => sample_index(&probs, rng),
            };
            // Log-prob through log-softmax so it agrees with rescoring.
            let last = lv.row(lv.rows - 1);
            step_log_probs.push(log_softmax_at(last, next));
            tokens.push(next as u32);
            if next as u32 == END_ID {
                break;
            }
            if inputs.len() == self.config.max_decode_len {
                break;
            }
            inputs.push(next as u32);
        }
        let truncated = tokens.last() != Some(&END_ID);
        Ok(Generated {
            log_prob: step_log_probs.iter().sum(),
            tokens,
            step_log_probs,
            truncated,
        })
    }
}

pub fn log_softmax_at(row: &[f64], k: usize) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    row[k] - lse
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

pub fn sample_index<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    // Rounding left u beyond the cumulative sum; take the last nonzero entry.
    p.iter().rposition(|v| *v > 0.0).unwrap_or(p.len() - 1)
}

/// The critic φ: its own state encoder, a trunk with the action encoder's
/// architecture, mean pooling over the four rows and a scalar head.
#[derive(Debug, Clone)]
pub struct CriticNet {
    pub state: StateEncoder,
    pub trunk: Encoder,
    pub head: Linear,
}

impl CriticNet {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, cfg: &ModelConfig) -> Self {
        let d = cfg.hidden_size;
        CriticNet {
            state: StateEncoder::new(pb, "critic.state", cfg),
            trunk: Encoder::new(pb, "critic.trunk", cfg.layers, d, cfg.heads, cfg.ff_size),
            head: Linear::zeroed(pb, "critic.head", d, 1),
        }
    }

    pub fn encode_state(&self, t: &mut Tape<'_>, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Var> {
        self.state.forward(t, texts)
    }

    /// V(s) as a 1×1 node for a state produced by [`CriticNet::encode_state`].
    pub fn value(&self, t: &mut Tape<'_>, state: Var) -> Var {
        let h = self.trunk.forward(t, state);
        let pooled = t.mean_rows(h);
        self.head.forward(t, pooled)
    }

    pub fn value_of(&self, t: &mut Tape<'_>, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Var> {
        let s = self.encode_state(t, texts)?;
        Ok(self.value(t, s))
    }
}

/// Classification head over a fixed list of candidate acts, on top of a
/// state encoder of the actor's architecture. The four state rows are
/// concatenated into one 1×4d feature vector.
#[derive(Debug, Clone)]
pub struct CandidateNet {
    pub state: StateEncoder,
    pub head: Linear,
    pub n_candidates: usize,
}

impl CandidateNet {
    pub fn new<R: Rng>(pb: &mut ParamBuilder<'_, R>, cfg: &ModelConfig, n_candidates: usize) -> Self {
        CandidateNet {
            state: StateEncoder::new(pb, "candidate.state", cfg),
            head: Linear::new(pb, "candidate.head", STATE_TEXTS * cfg.hidden_size, n_candidates),
            n_candidates,
        }
    }

    /// Log-probabilities over candidates, 1×K.
    pub fn log_probs(&self, t: &mut Tape<'_>, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Var> {
        let s = self.state.forward(t, texts)?;
        let rows: Vec<Var> = (0..STATE_TEXTS).map(|k| t.slice_rows(s, k, 1)).collect();
        let flat = t.concat_cols(&rows);
        let logits = self.head.forward(t, flat);
        Ok(t.log_softmax(logits))
    }
}

/// Actor and critic with their parameter sets.
#[derive(Debug, Clone)]
pub struct PolicyModel {
    pub config: ModelConfig,
    pub actor_net: ActorNet,
    pub critic_net: CriticNet,
    pub actor: ParamSet,
    pub critic: ParamSet,
}

impl PolicyModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor = ParamSet::new();
        let actor_net = ActorNet::new(
            &mut ParamBuilder {
                set: &mut actor,
                rng: &mut rng,
            },
            &config,
        );
        let mut critic = ParamSet::new();
        let critic_net = CriticNet::new(
            &mut ParamBuilder {
                set: &mut critic,
                rng: &mut rng,
            },
            &config,
        );
        Ok(PolicyModel {
            config,
            actor_net,
            critic_net,
            actor,
            critic,
        })
    }

    pub fn num_parameters(&self) -> usize {
        self.actor.num_scalars() + self.critic.num_scalars()
    }

    /// State matrix s as a plain value.
    pub fn encode_state(&self, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<Mat> {
        let mut t = Tape::new(&self.actor);
        let s = self.actor_net.encode_state(&mut t, texts)?;
        Ok(t.value(s).clone())
    }

    pub fn generate<R: Rng>(
        &self,
        texts: &[Vec<u32>; STATE_TEXTS],
        mode: DecodeMode,
        rng: &mut R,
    ) -> Result<Generated> {
        let mut t = Tape::new(&self.actor);
        let s = self.actor_net.encode_state(&mut t, texts)?;
        self.actor_net.generate(&mut t, s, mode, rng)
    }

    /// log π(tokens | state).
    pub fn score(&self, texts: &[Vec<u32>; STATE_TEXTS], tokens: &[u32]) -> Result<f64> {
        Ok(self.step_log_probs(texts, tokens)?.iter().sum())
    }

    pub fn step_log_probs(&self, texts: &[Vec<u32>; STATE_TEXTS], tokens: &[u32]) -> Result<Vec<f64>> {
        let mut t = Tape::new(&self.actor);
        let s = self.actor_net.encode_state(&mut t, texts)?;
        let lp = self.actor_net.decode_logprobs(&mut t, s, tokens)?;
        Ok(t.value(lp).data.clone())
    }

    /// Next-token distribution after `prefix` (which excludes the start token).
    pub fn next_token_probs(&self, texts: &[Vec<u32>; STATE_TEXTS], prefix: &[u32]) -> Result<Vec<f64>> {
        let mut t = Tape::new(&self.actor);
        let s = self.actor_net.encode_state(&mut t, texts)?;
        let memory = self.actor_net.memory(&mut t, s);
        let mut inputs = vec![START_ID];
        inputs.extend_from_slice(prefix);
        let logits = self.actor_net.logits(&mut t, memory, &inputs)?;
        let lv = t.value(logits);
        let mut p = lv.row(lv.rows - 1).to_vec();
        softmax_in_place(&mut p);
        Ok(p)
    }

    pub fn value(&self, texts: &[Vec<u32>; STATE_TEXTS]) -> Result<f64> {
        let mut t = Tape::new(&self.critic);
        let v = self.critic_net.value_of(&mut t, texts)?;
        Ok(t.value(v).item())
    }
}
