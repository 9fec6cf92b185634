//! Evaluation against the simulator: success rate, turns and reward.

use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_core::acts::{DialogueAct, UserGoal};
use wordact_core::{DialogueEnv, Episode, OraclePolicy};
use wordact_neural::DecodeMode;

use crate::error::{Result, RlError};
use crate::policy::Agent;

/// Anything that produces a system act for the current episode state.
pub trait SystemPolicy {
    fn respond(&mut self, episode: &Episode, env: &DialogueEnv) -> Result<DialogueAct>;
}

/// The goal-aware rule policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleSystem;

impl SystemPolicy for OracleSystem {
    fn respond(&mut self, episode: &Episode, env: &DialogueEnv) -> Result<DialogueAct> {
        Ok(OraclePolicy.act(episode, &env.db))
    }
}

/// Always says nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptySystem;

impl SystemPolicy for EmptySystem {
    fn respond(&mut self, _: &Episode, _: &DialogueEnv) -> Result<DialogueAct> {
        Ok(DialogueAct::empty())
    }
}

/// A trainable agent decoding in a fixed mode.
pub struct AgentSystem<'a, A: Agent + ?Sized> {
    pub agent: &'a A,
    pub mode: DecodeMode,
    pub rng: ChaCha8Rng,
}

impl<'a, A: Agent + ?Sized> AgentSystem<'a, A> {
    pub fn greedy(agent: &'a A) -> Self {
        AgentSystem {
            agent,
            mode: DecodeMode::Greedy,
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }
}

impl<A: Agent + ?Sized> SystemPolicy for AgentSystem<'_, A> {
    fn respond(&mut self, episode: &Episode, env: &DialogueEnv) -> Result<DialogueAct> {
        let obs = episode.observation(&env.db);
        Ok(self.agent.decide(&obs, &env.db, self.mode, &mut self.rng)?.act)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    System,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptTurn {
    pub speaker: Speaker,
    pub act: DialogueAct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub episode: usize,
    pub goal_seed: u64,
    pub goal: UserGoal,
    pub turns: Vec<TranscriptTurn>,
    pub success: bool,
    pub reward: f64,
}

impl Transcript {
    pub fn system_turns(&self) -> usize {
        self.turns.iter().filter(|t| t.speaker == Speaker::System).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub goal_seed: u64,
    pub success: bool,
    /// Utterances, a user-system exchange counting two.
    pub turns: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_episodes: usize,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub avg_reward: f64,
    pub episodes: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(|e| RlError::io(path, e))
    }
}

/// Runs one dialogue to the end.
pub fn run_episode(
    policy: &mut dyn SystemPolicy,
    env: &DialogueEnv,
    episode: usize,
    goal_seed: u64,
) -> Result<Transcript> {
    let mut ep = env.reset(goal_seed)?;
    let goal = ep.sim.goal.clone();
    let mut turns = vec![TranscriptTurn {
        speaker: Speaker::User,
        act: ep.user_act.clone(),
    }];
    let mut success = false;
    while !ep.done() {
        let act = policy.respond(&ep, env)?;
        turns.push(TranscriptTurn {
            speaker: Speaker::System,
            act: act.clone(),
        });
        let tr = env.step(&mut ep, &act)?;
        turns.push(TranscriptTurn {
            speaker: Speaker::User,
            act: tr.user_act,
        });
        success = tr.success;
    }
    Ok(Transcript {
        episode,
        goal_seed,
        goal,
        turns,
        success,
        reward: ep.env_return,
    })
}

/// Seeded evaluation: episode goal seeds are drawn from a generator seeded with `seed`.
pub fn evaluate(
    policy: &mut dyn SystemPolicy,
    env: &DialogueEnv,
    n_episodes: usize,
    seed: u64,
) -> Result<(EvalReport, Vec<Transcript>)> {
    if n_episodes == 0 {
        return Err(RlError::Usage("evaluation needs at least one episode".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transcripts = Vec::with_capacity(n_episodes);
    for i in 0..n_episodes {
        transcripts.push(run_episode(policy, env, i, rng.next_u64())?);
    }
    let episodes: Vec<EpisodeSummary> = transcripts
        .iter()
        .map(|t| EpisodeSummary {
            episode: t.episode,
            goal_seed: t.goal_seed,
            success: t.success,
            turns: 2 * t.system_turns(),
            reward: t.reward,
        })
        .collect();
    let n = n_episodes as f64;
    let successes = episodes.iter().filter(|e| e.success).count();
    let report = EvalReport {
        n_episodes,
        success_rate: successes as f64 / n,
        avg_turns: episodes.iter().map(|e| e.turns as f64).sum::<f64>() / n,
        avg_reward: episodes.iter().map(|e| e.reward).sum::<f64>() / n,
        episodes,
    };
    Ok((report, transcripts))
}

pub fn write_transcripts(path: &Path, transcripts: &[Transcript]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| RlError::io(path, e))?);
    for t in transcripts {
        writeln!(f, "{}", serde_json::to_string(t).expect("transcript serializes")).map_err(|e| RlError::io(path, e))?;
    }
    f.flush().map_err(|e| RlError::io(path, e))
}
