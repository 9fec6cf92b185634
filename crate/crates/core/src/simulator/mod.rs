//! Agenda-based rule user simulator with environment and shaping rewards.
//!
//! One dialogue alternates user and system utterances, starting with the user.
//! Every utterance advances `turn_index` by one, so an exchange counts as two
//! turns and `max_turns = 40` allows 20 system turns.

mod agenda;
mod goal;
mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use agenda::Agenda;
pub use goal::{sample_goal, MAX_GOAL_ATTEMPTS};
pub use oracle::OraclePolicy;

use crate::acts::{BeliefState, DbResultSummary, DialogueAct, Quadruple, UserGoal};
use crate::db::Database;
use crate::error::{CoreError, Result};
use crate::schema::{Schema, BYE, INFORM, NONE_VALUE};

/// User items popped per turn.
pub const USER_ACTS_PER_TURN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub per_turn: f64,
    pub success_bonus: f64,
    pub failure_penalty: f64,
    pub max_turns: usize,
    /// Shaping bonus for a first relevant inform/request.
    pub lambda: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            per_turn: -1.0,
            success_bonus: 80.0,
            failure_penalty: -40.0,
            max_turns: 40,
            lambda: 3.0,
            gamma: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_turns < 2 || self.max_turns % 2 != 0 {
            return Err(CoreError::validation(
                "reward.max_turns",
                format!("must be even and at least 2, got {}", self.max_turns),
            ));
        }
        if !(self.lambda > 0.0) {
            return Err(CoreError::validation("reward.lambda", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(CoreError::validation("reward.gamma", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// System turns available in one dialogue.
    pub fn max_system_turns(&self) -> usize {
        self.max_turns / 2
    }
}

/// Hidden simulator state for one dialogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorState {
    pub goal: UserGoal,
    pub agenda: Agenda,
    pub fulfilled_requests: BTreeMap<String, BTreeSet<String>>,
    pub informed_constraints: BTreeMap<String, BTreeSet<String>>,
    pub turn_index: usize,
    pub terminal: bool,
    pub success: bool,
}

impl SimulatorState {
    pub fn all_requests_fulfilled(&self) -> bool {
        self.goal.requests.iter().all(|(d, slots)| {
            let done = self.fulfilled_requests.get(d);
            slots.iter().all(|s| done.is_some_and(|f| f.contains(s)))
        })
    }

    pub fn all_constraints_informed(&self) -> bool {
        self.goal.constraints.iter().all(|(d, cs)| {
            let done = self.informed_constraints.get(d);
            cs.keys().all(|s| done.is_some_and(|f| f.contains(s)))
        })
    }

    /// The success predicate: every request answered and every constraint conveyed.
    pub fn goal_satisfied(&self) -> bool {
        self.all_requests_fulfilled() && self.all_constraints_informed()
    }

    pub fn system_turns(&self) -> usize {
        self.turn_index / 2
    }

    fn mark_informed(&mut self, act: &[Quadruple]) {
        for q in act.iter().filter(|q| q.is_inform()) {
            if self.goal.constraint(&q.domain, &q.slot).is_some() {
                self.informed_constraints
                    .entry(q.domain.clone())
                    .or_default()
                    .insert(q.slot.clone());
            }
        }
    }
}

/// What the user did in response to one system act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTurn {
    pub user_act: DialogueAct,
    pub env_reward: f64,
    pub terminal: bool,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct UserSimulator {
    pub schema: Schema,
    pub config: RewardConfig,
}

impl UserSimulator {
    pub fn new(schema: Schema, config: RewardConfig) -> Self {
        UserSimulator { schema, config }
    }

    pub fn init_agenda(goal: &UserGoal) -> Agenda {
        Agenda::from_goal(goal)
    }

    /// Opens a dialogue for `goal`; returns the state and the first user act.
    pub fn start(&self, goal: UserGoal) -> (SimulatorState, DialogueAct) {
        let agenda = Agenda::from_goal(&goal);
        let mut state = SimulatorState {
            goal,
            agenda,
            fulfilled_requests: BTreeMap::new(),
            informed_constraints: BTreeMap::new(),
            turn_index: 0,
            terminal: false,
            success: false,
        };
        let popped = state.agenda.pop_many(USER_ACTS_PER_TURN);
        state.mark_informed(&popped);
        state.turn_index = 1;
        (state, DialogueAct::new(popped))
    }

    fn goodbye(&self, goal: &UserGoal) -> DialogueAct {
        if !self.schema.is_intent(BYE) {
            return DialogueAct::empty();
        }
        goal.domains()
            .into_iter()
            .filter(|d| self.schema.is_slot(d, NONE_VALUE))
            .map(|d| Quadruple::new(d, BYE, NONE_VALUE, NONE_VALUE))
            .collect()
    }

    /// Applies the rules to one system act and produces the user's reply.
    ///
    /// Rule order: system requests of constrained slots push informs; informs
    /// of requested slots with a real value fulfil them; informs contradicting a
    /// constraint push a correction; then the dialogue ends successfully if the
    /// goal is satisfied, fails if the turn budget is spent, and otherwise the
    /// user pops up to [`USER_ACTS_PER_TURN`] agenda items.
    pub fn step(&self, state: &mut SimulatorState, system_act: &DialogueAct) -> Result<UserTurn> {
        if state.terminal {
            return Err(CoreError::Usage("step called on a finished dialogue".into()));
        }
        state.turn_index += 1;

        for q in system_act.iter().filter(|q| q.is_request()) {
            if let Some(v) = state.goal.constraint(&q.domain, &q.slot) {
                let item = Quadruple::new(&q.domain, INFORM, &q.slot, v);
                state.agenda.push(item);
            }
        }
        for q in system_act.iter().filter(|q| q.is_inform()) {
            if state.goal.is_requested(&q.domain, &q.slot) && q.value != NONE_VALUE {
                state
                    .fulfilled_requests
                    .entry(q.domain.clone())
                    .or_default()
                    .insert(q.slot.clone());
                state
                    .agenda
                    .remove_where(|a| a.is_request() && a.domain == q.domain && a.slot == q.slot);
            }
        }
        for q in system_act.iter().filter(|q| q.is_inform()) {
            if let Some(v) = state.goal.constraint(&q.domain, &q.slot) {
                if q.value != v {
                    let item = Quadruple::new(&q.domain, INFORM, &q.slot, v);
                    state.agenda.push(item);
                }
            }
        }

        let cfg = &self.config;
        if state.goal_satisfied() {
            state.terminal = true;
            state.success = true;
            return Ok(UserTurn {
                user_act: self.goodbye(&state.goal),
                env_reward: cfg.per_turn + cfg.success_bonus,
                terminal: true,
                success: true,
            });
        }
        if state.turn_index >= cfg.max_turns {
            state.terminal = true;
            state.success = false;
            return Ok(UserTurn {
                user_act: DialogueAct::empty(),
                env_reward: cfg.per_turn + cfg.failure_penalty,
                terminal: true,
                success: false,
            });
        }
        let popped = state.agenda.pop_many(USER_ACTS_PER_TURN);
        state.mark_informed(&popped);
        state.turn_index += 1;
        Ok(UserTurn {
            user_act: DialogueAct::new(popped),
            env_reward: cfg.per_turn,
            terminal: false,
            success: false,
        })
    }
}

/// Environment reward for the system turn that produced `state`.
pub fn env_reward(state: &SimulatorState, config: &RewardConfig) -> f64 {
    let mut r = config.per_turn;
    if state.terminal {
        r += if state.success {
            config.success_bonus
        } else {
            config.failure_penalty
        };
    }
    r
}

/// Remembers which (domain, intent, slot) shaping bonuses were already paid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapingState {
    rewarded: BTreeSet<(String, String, String)>,
}

/// Shaping term F: +λ for the first inform of a requested slot or the first
/// request of a constrained slot, −1 for any other inform/request (including
/// repeats), 0 for other intents.
pub fn shaping_bonus(
    goal: &UserGoal,
    system_act: &DialogueAct,
    shaping: &mut ShapingState,
    lambda: f64,
) -> f64 {
    system_act
        .iter()
        .map(|q| {
            let relevant = if q.is_inform() {
                goal.is_requested(&q.domain, &q.slot)
            } else if q.is_request() {
                goal.constraint(&q.domain, &q.slot).is_some()
            } else {
                return 0.0;
            };
            let key = (q.domain.clone(), q.intent.clone(), q.slot.clone());
            if relevant && shaping.rewarded.insert(key) {
                lambda
            } else {
                -1.0
            }
        })
        .sum()
}

/// The policy's view of the dialogue before a system turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub user_act: DialogueAct,
    pub last_system_act: DialogueAct,
    pub belief: BeliefState,
    pub db: DbResultSummary,
}

/// Outcome of one system turn inside an [`Episode`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub env_reward: f64,
    pub shaping: f64,
    pub user_act: DialogueAct,
    pub done: bool,
    pub success: bool,
}

/// A running dialogue: simulator state plus rule-based belief tracking.
#[derive(Debug, Clone)]
pub struct Episode {
    pub sim: SimulatorState,
    pub belief: BeliefState,
    pub user_act: DialogueAct,
    pub last_system_act: DialogueAct,
    pub shaping: ShapingState,
    pub env_return: f64,
}

impl Episode {
    pub fn observation(&self, db: &Database) -> Observation {
        Observation {
            user_act: self.user_act.clone(),
            last_system_act: self.last_system_act.clone(),
            belief: self.belief.clone(),
            db: db.match_counts(&self.belief),
        }
    }

    pub fn done(&self) -> bool {
        self.sim.terminal
    }
}

/// Simulator plus database; hands out seeded episodes.
#[derive(Debug, Clone)]
pub struct DialogueEnv {
    pub simulator: UserSimulator,
    pub db: Database,
}

impl DialogueEnv {
    pub fn new(schema: Schema, db: Database, config: RewardConfig) -> Self {
        DialogueEnv {
            simulator: UserSimulator::new(schema, config),
            db,
        }
    }

    pub fn toy(config: RewardConfig) -> Self {
        let schema = Schema::toy();
        let db = Database::toy(&schema);
        Self::new(schema, db, config)
    }

    pub fn schema(&self) -> &Schema {
        &self.simulator.schema
    }

    pub fn config(&self) -> &RewardConfig {
        &self.simulator.config
    }

    pub fn sample_goal(&self, seed: u64) -> Result<UserGoal> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_goal(&self.simulator.schema, &self.db, &mut rng)
    }

    pub fn start(&self, goal: UserGoal) -> Episode {
        let (sim, user_act) = self.simulator.start(goal);
        let mut belief = BeliefState::default();
        belief.update_from_user_act(&user_act);
        Episode {
            sim,
            belief,
            user_act,
            last_system_act: DialogueAct::empty(),
            shaping: ShapingState::default(),
            env_return: 0.0,
        }
    }

    pub fn reset(&self, seed: u64) -> Result<Episode> {
        Ok(self.start(self.sample_goal(seed)?))
    }

    pub fn step(&self, episode: &mut Episode, system_act: &DialogueAct) -> Result<Transition> {
        let shaping = shaping_bonus(
            &episode.sim.goal,
            system_act,
            &mut episode.shaping,
            self.simulator.config.lambda,
        );
        let turn = self.simulator.step(&mut episode.sim, system_act)?;
        debug_assert_eq!(turn.env_reward, env_reward(&episode.sim, self.config()));
        episode.belief.update_from_user_act(&turn.user_act);
        episode.user_act = turn.user_act.clone();
        episode.last_system_act = system_act.clone();
        episode.env_return += turn.env_reward;
        Ok(Transition {
            env_reward: turn.env_reward,
            shaping,
            user_act: turn.user_act,
            done: turn.terminal,
            success: turn.success,
        })
    }
}
