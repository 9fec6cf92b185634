//! Template surface realization: one fixed sentence per (intent, slot) shape.

use wordact_core::acts::{DialogueAct, Quadruple};
use wordact_core::schema::{NONE_VALUE, REQUEST_VALUE};

fn slot_words(slot: &str) -> String {
    slot.replace('_', " ")
}

fn system_sentence(q: &Quadruple) -> String {
    let (d, s, v) = (&q.domain, slot_words(&q.slot), &q.value);
    match (q.intent.as_str(), q.slot.as_str()) {
        ("inform", NONE_VALUE) => format!("I have found a {d} for you."),
        ("inform", _) if v == NONE_VALUE || v == REQUEST_VALUE => format!("I do not know the {s} of the {d}."),
        ("inform", _) => format!("The {s} of the {d} is {v}."),
        ("request", _) => format!("What {s} would you like for the {d}?"),
        ("nooffer", NONE_VALUE) => format!("There is no {d} matching your request."),
        ("nooffer", _) => format!("There is no {d} with {s} {v}."),
        ("bye", _) => "Goodbye.".to_string(),
        (i, _) => format!("{d} {i} {s} {v}."),
    }
}

fn user_sentence(q: &Quadruple) -> String {
    let (d, s, v) = (&q.domain, slot_words(&q.slot), &q.value);
    match (q.intent.as_str(), q.slot.as_str()) {
        ("inform", NONE_VALUE) => format!("I am looking for a {d}."),
        ("inform", _) => format!("I want a {d} with {s} {v}."),
        ("request", _) => format!("What is the {s} of the {d}?"),
        ("bye", _) => "Thank you, goodbye.".to_string(),
        (i, _) => format!("{d} {i} {s} {v}."),
    }
}

/// Renders a system act; an empty act gets a fixed clarification sentence.
pub fn render_system(act: &DialogueAct) -> String {
    if act.is_empty() {
        return "Sorry, could you say that again?".to_string();
    }
    act.iter().map(system_sentence).collect::<Vec<_>>().join(" ")
}

pub fn render_user(act: &DialogueAct) -> String {
    act.iter().map(user_sentence).collect::<Vec<_>>().join(" ")
}
