//! Expert (state, act) corpus produced by the rule policy against the simulator.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use wordact_core::acts::{AtomicAct, BeliefState, DbResultSummary, DialogueAct};
use wordact_core::{DialogueEnv, OraclePolicy};

use crate::candidate::canonical;
use crate::error::{Result, RlError};
use crate::policy::{Agent, StateCodec, StateIds};

/// One expert turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertRecord {
    pub user_act: DialogueAct,
    pub system_act_prev: DialogueAct,
    pub belief: BeliefState,
    pub db: DbResultSummary,
    pub target_act: DialogueAct,
}

impl ExpertRecord {
    pub fn target_triplets(&self) -> Vec<AtomicAct> {
        self.target_act.triplets()
    }
}

/// Generation options. `exclude` lists act templates (compared as triplet
/// sets) whose turns are left out of the corpus; the dialogues themselves
/// still run with the expert's act.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpertDataConfig {
    pub exclude: Vec<Vec<AtomicAct>>,
}

/// Runs the rule policy on freshly sampled goals until `n_turns` records are
/// collected. Goal seeds come from a generator seeded with `seed`.
pub fn generate_expert_data(
    env: &DialogueEnv,
    n_turns: usize,
    seed: u64,
    options: &ExpertDataConfig,
) -> Result<Vec<ExpertRecord>> {
    let excluded: Vec<Vec<AtomicAct>> = options.exclude.iter().map(|t| canonical(t)).collect();
    let oracle = OraclePolicy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_turns);
    while out.len() < n_turns {
        let mut ep = env.reset(rng.next_u64())?;
        while !ep.done() && out.len() < n_turns {
            let obs = ep.observation(&env.db);
            let act = oracle.act(&ep, &env.db);
            if !excluded.contains(&canonical(&act.triplets())) {
                out.push(ExpertRecord {
                    user_act: obs.user_act,
                    system_act_prev: obs.last_system_act,
                    belief: obs.belief,
                    db: obs.db,
                    target_act: act.clone(),
                });
            }
            env.step(&mut ep, &act)?;
        }
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, records: &[ExpertRecord]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| RlError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| RlError::io(path, e))?;
    }
    w.flush().map_err(|e| RlError::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<ExpertRecord>> {
    let file = std::fs::File::open(path).map_err(|e| RlError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| RlError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| RlError::Corpus {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// A supervised example in an agent's action encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub state: StateIds,
    pub action: Vec<u32>,
    pub target: Vec<AtomicAct>,
}

/// Encodes records for `agent`; records it cannot express are skipped.
pub fn to_examples<A: Agent + ?Sized>(agent: &A, records: &[ExpertRecord]) -> Result<Vec<Example>> {
    let codec: &StateCodec = agent.codec();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        let st = codec.encode_parts(&r.user_act, &r.system_act_prev, &r.belief, &r.db)?;
        let target = r.target_triplets();
        if let Some(action) = agent.encode_target(&target) {
            out.push(Example {
                state: st.ids,
                action,
                target,
            });
        }
    }
    Ok(out)
}
