//! Subcommands. Every command writes its artifacts plus `config.json`, the
//! resolved configuration, into the run directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Parser, Subcommand};
use wordact_core::DialogueEnv;
use wordact_rl::corpus::{read_jsonl, write_jsonl};
use wordact_rl::eval::write_transcripts;
use wordact_rl::ppo::write_metrics_csv;
use wordact_rl::{
    evaluate, exact_match, generate_expert_data, to_examples, train_ppo, warmup, AgentSystem, AnyPolicy,
    CandidatePolicy, CandidateSet, ExpertRecord, OracleSystem, PolicyKind, RunConfig, SystemPolicy, WordPolicy,
};

use crate::error::{AppError, Result};
use crate::service::{self, AppState, Model, DEFAULT_TURN_LIMIT};

pub const TRAIN_CORPUS: &str = "train.jsonl";
pub const VALID_CORPUS: &str = "valid.jsonl";
pub const WARMUP_CHECKPOINT: &str = "warmup.ckpt";
pub const PPO_CHECKPOINT: &str = "ppo.ckpt";

#[derive(Debug, Parser)]
#[command(name = "wordact", version, about = "Word-level dialogue policy workbench")]
pub struct Cli {
    /// JSON run configuration; defaults apply when omitted. WORDACT__SECTION__KEY variables override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "runs/default")]
    pub run_dir: PathBuf,

    /// Overrides the initialization and PPO seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the expert warm-up corpus with the rule policy.
    GenData,
    /// Supervised warm-up on the expert corpus; writes warmup.ckpt.
    Warmup,
    /// PPO fine-tuning from a checkpoint (default: warmup.ckpt in the run dir); writes ppo.ckpt and metrics.csv.
    TrainPpo {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides ppo.total_frames.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Greedy evaluation against the simulator; writes eval.json and transcripts.jsonl.
    Evaluate {
        /// Default: ppo.ckpt in the run dir, else warmup.ckpt.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Dump simulated dialogues of the rule policy, or of a checkpoint when given.
    Simulate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Serve interactive evaluation sessions over HTTP.
    Serve {
        /// Checkpoint to offer; repeat for several models. The file stem is the model id.
        #[arg(long = "checkpoint", required = true)]
        checkpoints: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_TURN_LIMIT)]
        turn_limit: usize,
    },
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.ppo.seed = seed;
    }
    if let Command::TrainPpo { frames: Some(f), .. } = cli.command {
        cfg.ppo.total_frames = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_run_dir(dir: &Path, cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).map_err(|e| AppError::io(&path, e))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let env = cfg.build_env()?;
    let dir = cli.run_dir.as_path();
    create_run_dir(dir, &cfg)?;
    match &cli.command {
        Command::GenData => gen_data(&cfg, &env, dir).map(|_| ()),
        Command::Warmup => warmup_cmd(&cfg, &env, dir),
        Command::TrainPpo { checkpoint, .. } => {
            let ck = checkpoint.clone().unwrap_or_else(|| dir.join(WARMUP_CHECKPOINT));
            train_ppo_cmd(&cfg, &env, dir, &ck)
        }
        Command::Evaluate { checkpoint } => {
            let ck = match checkpoint {
                Some(p) => p.clone(),
                None if dir.join(PPO_CHECKPOINT).exists() => dir.join(PPO_CHECKPOINT),
                None => dir.join(WARMUP_CHECKPOINT),
            };
            evaluate_cmd(&cfg, &env, dir, &ck)
        }
        Command::Simulate { checkpoint } => simulate_cmd(&cfg, &env, dir, checkpoint.as_deref()),
        Command::Serve {
            checkpoints,
            port,
            turn_limit,
        } => {
            let models = checkpoints
                .iter()
                .map(|p| Model::load(p, &env))
                .collect::<Result<Vec<_>>>()?;
            let state = Arc::new(AppState::open(env, models, dir.join("sessions"), *turn_limit)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| AppError::Usage(format!("cannot start runtime: {e}")))?;
            rt.block_on(service::serve(state, *port))
        }
    }
}

/// Writes both corpora and returns (train, valid).
pub fn gen_data(cfg: &RunConfig, env: &DialogueEnv, dir: &Path) -> Result<(Vec<ExpertRecord>, Vec<ExpertRecord>)> {
    let opts = cfg.data.expert_options();
    let train = generate_expert_data(env, cfg.warmup.train_turns, cfg.data.train_seed, &opts)?;
    let valid = generate_expert_data(env, cfg.warmup.valid_turns, cfg.data.valid_seed, &opts)?;
    write_jsonl(&dir.join(TRAIN_CORPUS), &train)?;
    write_jsonl(&dir.join(VALID_CORPUS), &valid)?;
    eprintln!("wrote {} train and {} validation turns", train.len(), valid.len());
    Ok((train, valid))
}

/// Reads the corpora from the run directory, generating them when absent.
fn corpora(cfg: &RunConfig, env: &DialogueEnv, dir: &Path) -> Result<(Vec<ExpertRecord>, Vec<ExpertRecord>)> {
    let (t, v) = (dir.join(TRAIN_CORPUS), dir.join(VALID_CORPUS));
    if t.exists() && v.exists() {
        Ok((read_jsonl(&t)?, read_jsonl(&v)?))
    } else {
        gen_data(cfg, env, dir)
    }
}

fn warmup_cmd(cfg: &RunConfig, env: &DialogueEnv, dir: &Path) -> Result<()> {
    let (train, valid) = corpora(cfg, env, dir)?;
    let schema = env.schema().clone();
    let mut policy = match cfg.policy {
        PolicyKind::Word => AnyPolicy::Word(WordPolicy::new(schema, cfg.model.model_config(), cfg.seed)?),
        PolicyKind::Candidate => {
            let acts: Vec<_> = train.iter().map(ExpertRecord::target_triplets).collect();
            let set = CandidateSet::from_acts(acts.iter().map(Vec::as_slice), cfg.data.candidate_cutoff, &schema)?;
            AnyPolicy::Candidate(CandidatePolicy::new(schema, cfg.model.model_config(), set, cfg.seed)?)
        }
    };
    report_parameters(&policy);
    let agent = policy.agent_mut();
    let tr = to_examples(agent, &train)?;
    let va = to_examples(agent, &valid)?;
    let start = Instant::now();
    let report = warmup(agent, &tr, &va, &cfg.warmup, cfg.seed)?;
    let exact = exact_match(agent, &va)?;
    eprintln!(
        "warm-up kept epoch {} (valid NLL {:.4}, exact-match {exact:.3}) in {:.0}s",
        report.best_epoch,
        report.best_valid_nll,
        start.elapsed().as_secs_f64()
    );
    write_json(
        &dir.join("warmup.json"),
        &serde_json::json!({"report": report, "valid_exact_match": exact, "train_examples": tr.len(), "valid_examples": va.len()}),
    )?;
    policy.save(&dir.join(WARMUP_CHECKPOINT))?;
    Ok(())
}

fn report_parameters(policy: &AnyPolicy) {
    let a = policy.agent();
    eprintln!(
        "{} policy: {} actor and {} critic parameters",
        policy.kind(),
        a.actor().num_scalars(),
        a.critic().num_scalars()
    );
}

fn load_policy(path: &Path, env: &DialogueEnv) -> Result<AnyPolicy> {
    if !path.exists() {
        return Err(AppError::Usage(format!("checkpoint {} does not exist", path.display())));
    }
    Ok(AnyPolicy::load(path, env.schema().clone())?)
}

fn train_ppo_cmd(cfg: &RunConfig, env: &DialogueEnv, dir: &Path, checkpoint: &Path) -> Result<()> {
    let mut policy = load_policy(checkpoint, env)?;
    report_parameters(&policy);
    let metrics_path = dir.join("metrics.csv");
    let start = Instant::now();
    let outcome = train_ppo(policy.agent_mut(), env, &cfg.ppo, |row, _| {
        eprintln!(
            "frame {:>6}: success {:.3}, turns {:.1}, reward {:.1} ({:.0}s)",
            row.frame,
            row.success_rate,
            row.avg_turns,
            row.avg_reward,
            start.elapsed().as_secs_f64()
        );
        Ok(())
    })?;
    write_metrics_csv(&metrics_path, &outcome.metrics)?;
    policy.save(&dir.join(PPO_CHECKPOINT))?;
    Ok(())
}

fn evaluate_cmd(cfg: &RunConfig, env: &DialogueEnv, dir: &Path, checkpoint: &Path) -> Result<()> {
    let policy = load_policy(checkpoint, env)?;
    let mut system = AgentSystem::greedy(policy.agent());
    let (report, transcripts) = evaluate(&mut system, env, cfg.eval.episodes, cfg.eval.seed)?;
    report.write_json(&dir.join("eval.json"))?;
    write_transcripts(&dir.join("transcripts.jsonl"), &transcripts)?;
    println!(
        "success {:.3}, turns {:.2}, reward {:.2} over {} episodes",
        report.success_rate, report.avg_turns, report.avg_reward, report.n_episodes
    );
    Ok(())
}

fn simulate_cmd(cfg: &RunConfig, env: &DialogueEnv, dir: &Path, checkpoint: Option<&Path>) -> Result<()> {
    let policy = checkpoint.map(|p| load_policy(p, env)).transpose()?;
    let mut oracle = OracleSystem;
    let mut agent_system = policy.as_ref().map(|p| AgentSystem::greedy(p.agent()));
    let system: &mut dyn SystemPolicy = match agent_system.as_mut() {
        Some(s) => s,
        None => &mut oracle,
    };
    let (report, transcripts) = evaluate(system, env, cfg.eval.episodes, cfg.eval.seed)?;
    write_transcripts(&dir.join("simulate.jsonl"), &transcripts)?;
    println!(
        "simulated {} dialogues, success {:.3}",
        report.n_episodes, report.success_rate
    );
    Ok(())
}
