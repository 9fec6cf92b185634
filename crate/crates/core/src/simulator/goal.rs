use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::acts::UserGoal;
use crate::db::Database;
use crate::error::{CoreError, Result};
use crate::schema::Schema;

/// Rejection-sampling bound for satisfiable goals.
pub const MAX_GOAL_ATTEMPTS: usize = 1000;

/// Inclusion probability of a slot: its weight relative to the heaviest slot of the domain.
fn inclusion_probability(schema: &Schema, domain: &str, slot: &str) -> f64 {
    let max = schema
        .goal_slot_weights
        .get(domain)
        .map(|w| w.values().cloned().fold(0.0, f64::max))
        .unwrap_or(0.0);
    if max > 0.0 {
        schema.weight(domain, slot) / max
    } else {
        0.0
    }
}

/// Picks one `(domain, slot)` proportionally to weight, uniformly if every weight is zero.
fn pick_weighted<R: Rng + ?Sized>(
    schema: &Schema,
    candidates: &[(String, String)],
    rng: &mut R,
) -> Option<(String, String)> {
    if candidates.is_empty() {
        return None;
    }
    let weights: Vec<f64> = candidates
        .iter()
        .map(|(d, s)| schema.weight(d, s))
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return candidates.choose(rng).cloned();
    }
    let mut x = rng.gen::<f64>() * total;
    for (c, w) in candidates.iter().zip(&weights) {
        if x < *w {
            return Some(c.clone());
        }
        x -= w;
    }
    candidates.last().cloned()
}

fn draw<R: Rng + ?Sized>(schema: &Schema, rng: &mut R) -> UserGoal {
    let domains: Vec<&String> = schema.domains.iter().collect();
    let n = rng.gen_range(1..=domains.len().min(2));
    let picked: Vec<&String> = domains.choose_multiple(rng, n).copied().collect();
    let mut picked: Vec<String> = picked.into_iter().cloned().collect();
    picked.sort();

    let mut goal = UserGoal::default();
    for d in &picked {
        let informable = schema.informable.get(d).cloned().unwrap_or_default();
        let requestable = schema.requestable.get(d).cloned().unwrap_or_default();
        for s in &informable {
            if rng.gen::<f64>() < inclusion_probability(schema, d, s) {
                let values = schema.values(d, s).unwrap_or(&[]);
                if let Some(v) = values.choose(rng) {
                    goal.constraints
                        .entry(d.clone())
                        .or_default()
                        .insert(s.clone(), v.clone());
                }
            }
        }
        for s in requestable.iter().filter(|s| !informable.contains(*s)) {
            if rng.gen::<f64>() < inclusion_probability(schema, d, s) {
                goal.requests.entry(d.clone()).or_default().insert(s.clone());
            }
        }
    }

    if goal.num_constraints() == 0 {
        let cands: Vec<(String, String)> = picked
            .iter()
            .flat_map(|d| {
                schema
                    .informable
                    .get(d)
                    .into_iter()
                    .flatten()
                    .map(move |s| (d.clone(), s.clone()))
            })
            .collect();
        if let Some((d, s)) = pick_weighted(schema, &cands, rng) {
            if let Some(v) = schema.values(&d, &s).and_then(|vs| vs.choose(rng)) {
                goal.constraints.entry(d).or_default().insert(s, v.clone());
            }
        }
    }
    if goal.num_requests() == 0 {
        let cands: Vec<(String, String)> = picked
            .iter()
            .flat_map(|d| {
                schema
                    .requestable
                    .get(d)
                    .into_iter()
                    .flatten()
                    .filter(|s| goal.constraint(d, s).is_none())
                    .map(move |s| (d.clone(), s.clone()))
            })
            .collect();
        if let Some((d, s)) = pick_weighted(schema, &cands, rng) {
            goal.requests.entry(d).or_default().insert(s);
        }
    }
    goal
}

fn acceptable(goal: &UserGoal, schema: &Schema, db: &Database) -> bool {
    if goal.num_constraints() == 0 || goal.num_requests() == 0 {
        return false;
    }
    let domains: BTreeSet<&str> = goal.domains();
    domains.iter().all(|d| {
        let constraints = goal.constraints.get(*d).cloned().unwrap_or_default();
        !db.query(d, &constraints).is_empty()
    }) && goal.validate(schema).is_ok()
}

/// Samples 1–2 domains and per-slot constraints/requests by weight, resampling
/// until the database holds an entity satisfying every domain's constraints.
pub fn sample_goal<R: Rng + ?Sized>(schema: &Schema, db: &Database, rng: &mut R) -> Result<UserGoal> {
    for _ in 0..MAX_GOAL_ATTEMPTS {
        let goal = draw(schema, rng);
        if acceptable(&goal, schema, db) {
            return Ok(goal);
        }
    }
    Err(CoreError::UnsatisfiableGoal {
        attempts: MAX_GOAL_ATTEMPTS,
    })
}
