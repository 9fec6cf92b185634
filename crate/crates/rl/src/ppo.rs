//! Clipped-ratio policy optimization with a state-value critic.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_core::{populate_values, DialogueEnv};
use wordact_neural::{Adam, AdamConfig, DecodeMode, Grads, Tape, Var};

use crate::error::{Result, RlError};
use crate::eval::{evaluate, AgentSystem, EvalReport};
use crate::policy::{Agent, StateIds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub clip_eps: f64,
    pub total_frames: usize,
    /// Frames collected before each update; episodes always run to the end,
    /// so a batch may exceed this.
    pub batch_frames: usize,
    pub update_epochs: usize,
    pub minibatch_size: usize,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub reward_shaping: bool,
    pub seed: u64,
    /// Greedy evaluation episodes at each learning-curve point.
    pub eval_episodes: usize,
    pub eval_seed: u64,
    /// Evaluate whenever this many frames have passed since the last point.
    pub eval_every_frames: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            actor_lr: 5e-7,
            critic_lr: 1e-4,
            clip_eps: 0.2,
            total_frames: 50_000,
            batch_frames: 512,
            update_epochs: 4,
            minibatch_size: 64,
            max_grad_norm: 1.0,
            normalize_advantages: true,
            reward_shaping: true,
            seed: 0,
            eval_episodes: 100,
            eval_seed: 1_000_003,
            eval_every_frames: 512,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(RlError::Config("ppo.clip_eps must lie in (0, 1)".into()));
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr), ("max_grad_norm", self.max_grad_norm)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(RlError::Config(format!("ppo.{name} must be positive")));
            }
        }
        let counts = [
            ("total_frames", self.total_frames),
            ("batch_frames", self.batch_frames),
            ("update_epochs", self.update_epochs),
            ("minibatch_size", self.minibatch_size),
            ("eval_episodes", self.eval_episodes),
            ("eval_every_frames", self.eval_every_frames),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(RlError::Config(format!("ppo.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// One system turn.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub state: StateIds,
    pub action: Vec<u32>,
    /// log π_old(a|s) under the snapshot that sampled the action.
    pub old_log_prob: f64,
    /// Reward used for learning: environment reward plus shaping when enabled.
    pub reward: f64,
    pub env_reward: f64,
    pub value: f64,
    pub next_value: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub steps: Vec<RolloutStep>,
    pub episodes: usize,
    pub successes: usize,
}

impl RolloutBuffer {
    pub fn frames(&self) -> usize {
        self.steps.len()
    }
}

/// Samples complete episodes until at least `n_frames` turns are recorded.
pub fn collect<A: Agent + ?Sized>(
    agent: &A,
    env: &DialogueEnv,
    n_frames: usize,
    shaping: bool,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutBuffer> {
    let mut buf = RolloutBuffer::default();
    while buf.frames() < n_frames {
        let mut ep = env.reset(rng.next_u64())?;
        buf.episodes += 1;
        let mut prev: Option<usize> = None;
        while !ep.done() {
            let obs = ep.observation(&env.db);
            let st = agent.codec().encode(&obs)?;
            let value = agent.value(&st.ids)?;
            if let Some(i) = prev {
                buf.steps[i].next_value = value;
            }
            let sampled = agent.sample(&st.ids, DecodeMode::Sample, rng)?;
            let act = populate_values(&agent.interpret(&sampled.action), &env.db, &obs.belief);
            let tr = env.step(&mut ep, &act)?;
            let reward = tr.env_reward + if shaping { tr.shaping } else { 0.0 };
            buf.steps.push(RolloutStep {
                state: st.ids,
                action: sampled.action,
                old_log_prob: sampled.log_prob,
                reward,
                env_reward: tr.env_reward,
                value,
                next_value: 0.0,
                done: tr.done,
            });
            if tr.success {
                buf.successes += 1;
            }
            prev = Some(buf.steps.len() - 1);
        }
    }
    Ok(buf)
}

/// One-step advantages Â = r̂ + γ·V(s')·(1 − done) − V(s).
pub fn advantages(buffer: &RolloutBuffer, gamma: f64) -> Vec<f64> {
    buffer
        .steps
        .iter()
        .map(|s| td_target(s, gamma) - s.value)
        .collect()
}

pub fn td_target(step: &RolloutStep, gamma: f64) -> f64 {
    step.reward + if step.done { 0.0 } else { gamma * step.next_value }
}

/// Shifts to mean 0 and scales to standard deviation 1 (std floored at 1e-8).
pub fn normalize(xs: &mut [f64]) {
    if xs.is_empty() {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs {
        *x = (*x - mean) / std;
    }
}

/// Clipped surrogate −mean(min(ρ·Â, clip(ρ, 1−ε, 1+ε)·Â)) with ρ = exp(log π − log π_old).
/// Returns the loss node and the ratio nodes.
pub fn actor_loss<A: Agent + ?Sized>(
    agent: &A,
    t: &mut Tape<'_>,
    steps: &[&RolloutStep],
    adv: &[f64],
    clip_eps: f64,
) -> Result<(Var, Vec<Var>)> {
    assert_eq!(steps.len(), adv.len());
    let mut terms = Vec::with_capacity(steps.len());
    let mut ratios = Vec::with_capacity(steps.len());
    for (s, &a) in steps.iter().zip(adv) {
        let lp = agent.action_log_prob(t, &s.state, &s.action)?;
        let diff = t.add_scalar(lp, -s.old_log_prob);
        let ratio = t.exp(diff);
        let unclipped = t.scale(ratio, a);
        let clipped = t.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
        let clipped = t.scale(clipped, a);
        terms.push(t.min(unclipped, clipped));
        ratios.push(ratio);
    }
    let total = t.add_all(&terms);
    Ok((t.scale(total, -1.0 / steps.len() as f64), ratios))
}

/// Mean squared error between V(s) and the one-step targets.
pub fn value_loss<A: Agent + ?Sized>(
    agent: &A,
    t: &mut Tape<'_>,
    steps: &[&RolloutStep],
    targets: &[f64],
) -> Result<Var> {
    assert_eq!(steps.len(), targets.len());
    let mut terms = Vec::with_capacity(steps.len());
    for (s, &y) in steps.iter().zip(targets) {
        let v = agent.critic_net().value_of(t, &s.state)?;
        let d = t.add_scalar(v, -y);
        terms.push(t.mul(d, d));
    }
    let total = t.add_all(&terms);
    Ok(t.scale(total, 1.0 / steps.len() as f64))
}

pub fn actor_gradient<A: Agent + ?Sized>(
    agent: &A,
    steps: &[&RolloutStep],
    adv: &[f64],
    clip_eps: f64,
) -> Result<(f64, Grads)> {
    let mut t = Tape::new(agent.actor());
    let (loss, _) = actor_loss(agent, &mut t, steps, adv, clip_eps)?;
    let value = t.value(loss).item();
    Ok((value, t.backward(loss)?))
}

pub fn critic_gradient<A: Agent + ?Sized>(agent: &A, steps: &[&RolloutStep], targets: &[f64]) -> Result<(f64, Grads)> {
    let mut t = Tape::new(agent.critic());
    let loss = value_loss(agent, &mut t, steps, targets)?;
    let value = t.value(loss).item();
    Ok((value, t.backward(loss)?))
}

/// Optimizer state carried across updates.
#[derive(Debug, Clone)]
pub struct PpoOptimizers {
    pub actor: Adam,
    pub critic: Adam,
}

impl PpoOptimizers {
    pub fn new<A: Agent + ?Sized>(agent: &A, cfg: &PpoConfig) -> Self {
        PpoOptimizers {
            actor: Adam::new(AdamConfig::with_lr(cfg.actor_lr), agent.actor()),
            critic: Adam::new(AdamConfig::with_lr(cfg.critic_lr), agent.critic()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub value_loss: f64,
    pub minibatches: usize,
}

pub fn ppo_update<A: Agent + ?Sized>(
    agent: &mut A,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    gamma: f64,
    opt: &mut PpoOptimizers,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let mut adv = advantages(buffer, gamma);
    if cfg.normalize_advantages {
        normalize(&mut adv);
    }
    let targets: Vec<f64> = buffer.steps.iter().map(|s| td_target(s, gamma)).collect();
    let mut order: Vec<usize> = (0..buffer.frames()).collect();
    let mut stats = UpdateStats::default();
    for _ in 0..cfg.update_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let steps: Vec<&RolloutStep> = chunk.iter().map(|&i| &buffer.steps[i]).collect();
            let a: Vec<f64> = chunk.iter().map(|&i| adv[i]).collect();
            let y: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();

            let (al, mut g) = actor_gradient(agent, &steps, &a, cfg.clip_eps).map_err(divergence)?;
            g.clip_norm(cfg.max_grad_norm);
            opt.actor.step(agent.actor_mut(), &g).map_err(|e| divergence(e.into()))?;

            let (vl, mut g) = critic_gradient(agent, &steps, &y).map_err(divergence)?;
            g.clip_norm(cfg.max_grad_norm);
            opt.critic.step(agent.critic_mut(), &g).map_err(|e| divergence(e.into()))?;

            stats.actor_loss += al;
            stats.value_loss += vl;
            stats.minibatches += 1;
        }
    }
    if stats.minibatches > 0 {
        stats.actor_loss /= stats.minibatches as f64;
        stats.value_loss /= stats.minibatches as f64;
    }
    Ok(stats)
}

fn divergence(e: RlError) -> RlError {
    if e.is_divergence() {
        RlError::Divergence(e.to_string())
    } else {
        e
    }
}

/// One learning-curve point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub frame: usize,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub avg_reward: f64,
    pub seed: u64,
}

impl MetricsRow {
    pub fn from_report(frame: usize, report: &EvalReport, seed: u64) -> Self {
        MetricsRow {
            frame,
            success_rate: report.success_rate,
            avg_turns: report.avg_turns,
            avg_reward: report.avg_reward,
            seed,
        }
    }
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RlError::io(path, e.into()))?;
    for r in rows {
        w.serialize(r).map_err(|e| RlError::io(path, e.into()))?;
    }
    w.flush().map_err(|e| RlError::io(path, e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| RlError::io(path, e.into()))?;
    r.deserialize()
        .map(|row| row.map_err(|e| RlError::io(path, e.into())))
        .collect()
}

/// What one collect-and-update cycle saw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub frames: usize,
    pub episodes: usize,
    /// Successes under the sampling policy.
    pub successes: usize,
    pub update: UpdateStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub metrics: Vec<MetricsRow>,
    pub frames: usize,
    pub batches: Vec<BatchStats>,
}

/// Greedy evaluation on the fixed evaluation goals.
pub fn evaluate_agent<A: Agent + ?Sized>(agent: &A, env: &DialogueEnv, cfg: &PpoConfig) -> Result<EvalReport> {
    let mut sys = AgentSystem::greedy(agent);
    Ok(evaluate(&mut sys, env, cfg.eval_episodes, cfg.eval_seed)?.0)
}

/// Alternates collection and updates until `total_frames`, evaluating at
/// frame 0, every `eval_every_frames` and at the end. `on_point` sees each
/// metrics row with the parameters that produced it.
fn ensure_finite<A: Agent + ?Sized>(agent: &A, what: &str) -> Result<()> {
    if agent.actor().all_finite() && agent.critic().all_finite() {
        Ok(())
    } else {
        Err(RlError::Divergence(format!("non-finite {what}")))
    }
}

pub fn train_ppo<A: Agent + ?Sized>(
    agent: &mut A,
    env: &DialogueEnv,
    cfg: &PpoConfig,
    mut on_point: impl FnMut(&MetricsRow, &A) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure_finite(agent, "initial parameters")?;
    let gamma = env.config().gamma;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = PpoOptimizers::new(agent, cfg);
    let mut metrics = Vec::new();
    let mut batches = Vec::new();
    let first = MetricsRow::from_report(0, &evaluate_agent(agent, env, cfg)?, cfg.seed);
    on_point(&first, agent)?;
    metrics.push(first);
    let mut frames = 0;
    let mut last_eval = 0;
    while frames < cfg.total_frames {
        let buffer = collect(agent, env, cfg.batch_frames, cfg.reward_shaping, &mut rng)?;
        frames += buffer.frames();
        let update = ppo_update(agent, &buffer, cfg, gamma, &mut opt, &mut rng)?;
        ensure_finite(agent, "parameters after an update")?;
        batches.push(BatchStats {
            frames: buffer.frames(),
            episodes: buffer.episodes,
            successes: buffer.successes,
            update,
        });
        if frames - last_eval >= cfg.eval_every_frames || frames >= cfg.total_frames {
            let row = MetricsRow::from_report(frames, &evaluate_agent(agent, env, cfg)?, cfg.seed);
            on_point(&row, agent)?;
            metrics.push(row);
            last_eval = frames;
        }
    }
    Ok(TrainOutcome {
        metrics,
        frames,
        batches,
    })
}
