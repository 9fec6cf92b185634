use crate::acts::{AtomicAct, DialogueAct};
use crate::db::Database;
use crate::grammar::populate_values;
use crate::schema::{INFORM, NONE_VALUE, REQUEST};

use super::Episode;

/// Hand-coded system policy with access to the hidden goal.
///
/// Answers every slot the user requested in the latest turn, filling values
/// from the database. When there is nothing to answer it asks for goal
/// constraints the user has not conveyed yet.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl OraclePolicy {
    pub fn triplets(&self, episode: &Episode) -> Vec<AtomicAct> {
        let mut out: Vec<AtomicAct> = Vec::new();
        for q in episode.user_act.iter().filter(|q| q.is_request()) {
            let a = AtomicAct::new(&q.domain, INFORM, &q.slot);
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            let sim = &episode.sim;
            let pending = sim.agenda.iter_top_down().any(|q| q.is_inform());
            if !pending {
                for (d, cs) in &sim.goal.constraints {
                    for s in cs.keys() {
                        let informed = sim
                            .informed_constraints
                            .get(d)
                            .is_some_and(|set| set.contains(s));
                        if !informed {
                            out.push(AtomicAct::new(d, REQUEST, s));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn act(&self, episode: &Episode, db: &Database) -> DialogueAct {
        let mut act = populate_values(&self.triplets(episode), db, &episode.belief);
        // An answer the database cannot back would not fulfil the request.
        act.quadruples
            .retain(|q| !(q.is_inform() && q.value == NONE_VALUE));
        act
    }
}
