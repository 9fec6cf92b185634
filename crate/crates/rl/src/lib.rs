//! Policy learning for word-level dialogue acts: expert data, supervised
//! warm-up, clipped policy optimization and evaluation.

pub mod candidate;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod llm;
pub mod policy;
pub mod ppo;
pub mod warmup;

pub use candidate::{canonical, CandidatePolicy, CandidateSet};
pub use config::{PolicyKind, RunConfig};
pub use corpus::{generate_expert_data, to_examples, Example, ExpertDataConfig, ExpertRecord};
pub use error::{Result, RlError};
pub use eval::{evaluate, run_episode, AgentSystem, EmptySystem, EvalReport, OracleSystem, SystemPolicy, Transcript};
pub use llm::{build_llm_prompt, parse_llm_reply, LlmPolicy, LlmTransport, ReplayTransport};
pub use policy::{Agent, AnyPolicy, Decision, PolicyDecision, Sampled, StateCodec, StateIds, WordPolicy};
pub use ppo::{train_ppo, MetricsRow, PpoConfig, RolloutBuffer, RolloutStep, TrainOutcome};
pub use warmup::{exact_match, mean_nll, warmup, WarmupConfig, WarmupReport};
