//! Domain model for word-level dialogue policy learning.
//!
//! Dialogue acts are lists of (domain, intent, slot, value) quadruples over a
//! closed [`Schema`]. The dialogue state is linearized into four token
//! sequences (user act, system act, belief state, database counts) that the
//! neural encoders consume, and generated act text is turned back into
//! structured acts by the interpreter in [`grammar`].

pub mod acts;
pub mod db;
pub mod error;
pub mod grammar;
pub mod schema;
pub mod simulator;
pub mod text;

pub use acts::{AtomicAct, BeliefState, BeliefTriplet, DbResultSummary, DialogueAct, Quadruple, UserGoal};
pub use db::{Database, Entity};
pub use error::{CoreError, Result};
pub use grammar::{linearize_target, parse_act_text, populate_values, ParseReport};
pub use schema::Schema;
pub use simulator::{DialogueEnv, Episode, Observation, OraclePolicy, RewardConfig, Transition};
pub use text::{build_state_text, DialogueStateText, Vocabulary};
