//! Supervised warm-up: per-token negative log-likelihood of expert acts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_neural::{Adam, AdamConfig, DecodeMode, Grads, Tape};

use crate::candidate::canonical;
use crate::corpus::Example;
use crate::error::{Result, RlError};
use crate::policy::Agent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarmupConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub train_turns: usize,
    pub valid_turns: usize,
}

impl Default for WarmupConfig {
    fn default() -> Self {
        WarmupConfig {
            batch_size: 32,
            lr: 3e-4,
            epochs: 80,
            patience: 5,
            train_turns: 10_000,
            valid_turns: 3_000,
        }
    }
}

impl WarmupConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("patience", self.patience),
            ("train_turns", self.train_turns),
            ("valid_turns", self.valid_turns),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(RlError::Config(format!("warmup.{name} must be positive")));
            }
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(RlError::Config("warmup.lr must be positive".into()));
        }
        if self.patience > self.epochs {
            return Err(RlError::Config("warmup.patience must not exceed warmup.epochs".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_nll: f64,
    pub valid_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmupReport {
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_valid_nll: f64,
    pub stopped_early: bool,
}

/// Summed action log-likelihood and token count over `batch`, on one tape.
fn batch_loss<A: Agent + ?Sized>(agent: &A, batch: &[&Example]) -> Result<(f64, usize, Grads)> {
    let mut t = Tape::new(agent.actor());
    let mut terms = Vec::with_capacity(batch.len());
    let mut tokens = 0;
    for ex in batch {
        terms.push(agent.action_log_prob(&mut t, &ex.state, &ex.action)?);
        tokens += ex.action.len();
    }
    let total = t.add_all(&terms);
    let loss = t.scale(total, -1.0 / tokens as f64);
    let value = t.value(loss).item();
    if !value.is_finite() {
        return Err(RlError::Divergence(format!("warm-up loss is {value}")));
    }
    let grads = t.backward(loss)?;
    Ok((value, tokens, grads))
}

/// Mean per-token NLL of `examples`.
pub fn mean_nll<A: Agent + ?Sized>(agent: &A, examples: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    let mut tokens = 0;
    for ex in examples {
        total -= agent.score(&ex.state, &ex.action)?;
        tokens += ex.action.len();
    }
    Ok(if tokens == 0 { 0.0 } else { total / tokens as f64 })
}

/// Share of examples whose greedy act has exactly the target's triplets (as a set).
pub fn exact_match<A: Agent + ?Sized>(agent: &A, examples: &[Example]) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut hits = 0;
    for ex in examples {
        let s = agent.sample(&ex.state, DecodeMode::Greedy, &mut rng)?;
        if canonical(&agent.interpret(&s.action)) == canonical(&ex.target) {
            hits += 1;
        }
    }
    Ok(hits as f64 / examples.len() as f64)
}

/// Trains the actor with early stopping on validation NLL and leaves the
/// best-validation parameters in place.
pub fn warmup<A: Agent + ?Sized>(
    agent: &mut A,
    train: &[Example],
    valid: &[Example],
    cfg: &WarmupConfig,
    seed: u64,
) -> Result<WarmupReport> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(RlError::Usage("warm-up needs a non-empty training set".into()));
    }
    if valid.is_empty() {
        return Err(RlError::Usage("warm-up needs a non-empty validation set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr), agent.actor());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = agent.actor().clone();
    let mut best_valid = mean_nll(agent, valid)?;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut tokens = 0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, n, grads) = batch_loss(agent, &batch).map_err(|e| match e {
                RlError::Divergence(m) => RlError::Divergence(format!("epoch {epoch}: {m}")),
                other => other,
            })?;
            sum += loss * n as f64;
            tokens += n;
            opt.step(agent.actor_mut(), &grads)?;
        }
        let valid_nll = mean_nll(agent, valid)?;
        if !valid_nll.is_finite() {
            return Err(RlError::Divergence(format!("epoch {epoch}: validation NLL is {valid_nll}")));
        }
        history.push(EpochStats {
            epoch,
            train_nll: sum / tokens as f64,
            valid_nll,
        });
        if valid_nll < best_valid {
            best_valid = valid_nll;
            best_epoch = epoch;
            best = agent.actor().clone();
        } else if epoch - best_epoch >= cfg.patience {
            stopped_early = true;
            break;
        }
    }
    agent.actor_mut().assign_from(&best)?;
    Ok(WarmupReport {
        history,
        best_epoch,
        best_valid_nll: best_valid,
        stopped_early,
    })
}
