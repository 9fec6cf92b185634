//! Zero-shot language-model baseline: prompt construction, reply parsing and
//! a pluggable transport. No network client ships here; replies come from a
//! replay file or a fixed mock.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use wordact_core::acts::{AtomicAct, DbResultSummary, DialogueAct, Quadruple};
use wordact_core::schema::{normalize_name, REQUEST, REQUEST_VALUE, NONE_VALUE};
use wordact_core::{populate_values, DialogueEnv, Episode, Schema};

use crate::error::{Result, RlError};
use crate::eval::{Speaker, SystemPolicy};

const TASK_DEFINITION: &str = "You are a dialogue agent to assist me with my queries and provide me with relevant \
information from a database. My questions are formatted as tuples of (domain, intent, slot, slot value) \
accompanied by the number of matching results that satisfy my constraint from the database, e.g., \"4 matches\".";

const OUTPUT_SPECIFICATION: &str = "Your responses should be formatted as one or several tuples of \
(domain, intent, slot) to provide me with the necessary information.";

/// One utterance of the history shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmTurn {
    pub speaker: Speaker,
    pub act: DialogueAct,
}

/// "N matches" for one domain, a per-domain listing for several, "0 matches" when empty.
pub fn render_matches(db: &DbResultSummary) -> String {
    fn n(c: usize) -> String {
        if c == 1 {
            "1 match".into()
        } else {
            format!("{c} matches")
        }
    }
    match db.counts.as_slice() {
        [] => n(0),
        [(_, c)] => n(*c),
        many => many
            .iter()
            .map(|(d, c)| format!("{d} {}", n(*c)))
            .collect::<Vec<_>>()
            .join(", "),
    }
}

fn render_user(act: &DialogueAct) -> String {
    let tuples: Vec<String> = act
        .iter()
        .map(|q| format!("({}, {}, {}, {})", q.domain, q.intent, q.slot, q.value))
        .collect();
    format!("[{}]", tuples.join(", "))
}

fn render_system(act: &DialogueAct) -> String {
    let tuples: Vec<String> = act
        .iter()
        .map(|q| format!("({}, {}, {})", q.domain, q.intent, q.slot))
        .collect();
    format!("[{}]", tuples.join(", "))
}

fn join_or(items: &[&str]) -> String {
    match items {
        [] => String::new(),
        [one] => (*one).to_string(),
        [a, b] => format!("{a} or {b}"),
        [init @ .., last] => format!("{}, or {last}", init.join(", ")),
    }
}

/// Slot glossary: every slot name with the domains that carry it.
fn slot_lines(schema: &Schema) -> Vec<String> {
    let mut owners: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for d in &schema.domains {
        for s in schema.slot_names(d) {
            owners.entry(s).or_default().push(d);
        }
    }
    owners
        .into_iter()
        .map(|(s, ds)| {
            if s == NONE_VALUE {
                format!("{s}: no particular slot")
            } else {
                format!("{s}: the {} of the {}", s.replace('_', " "), join_or(&ds))
            }
        })
        .collect()
}

/// The formatting example, drawn from the schema so it never names an
/// unknown domain: the first domain's first informable slot and value,
/// answered with an inform of its first requestable slot.
fn formatting_example(schema: &Schema) -> Option<(DialogueAct, DialogueAct)> {
    for d in &schema.domains {
        let Some(slot) = schema.informable.get(d).and_then(|s| s.iter().next()) else {
            continue;
        };
        let Some(value) = schema.values(d, slot).and_then(|v| v.first()) else {
            continue;
        };
        let Some(answer) = schema.requestable.get(d).and_then(|s| s.iter().next()) else {
            continue;
        };
        let user = DialogueAct::new(vec![Quadruple::new(d, "inform", slot, value)]);
        let system = DialogueAct::new(vec![Quadruple::new(d, "inform", answer, NONE_VALUE)]);
        return Some((user, system));
    }
    None
}

/// Renders the prompt: task definition, output specification, one formatting
/// example, then the dialogue history. `db` is the match summary for the
/// latest user turn. The prompt ends with the assistant cue.
pub fn build_llm_prompt(schema: &Schema, history: &[LlmTurn], db: &DbResultSummary) -> Result<String> {
    let last_user = history
        .iter()
        .rposition(|t| t.speaker == Speaker::User)
        .ok_or_else(|| RlError::Usage("prompt history needs at least one user turn".into()))?;
    let domains: Vec<&str> = schema.domains.iter().map(String::as_str).collect();
    let intents: Vec<&str> = schema.intents.iter().map(String::as_str).collect();
    let mut p = String::new();
    writeln!(p, "{TASK_DEFINITION}").unwrap();
    writeln!(p, "{OUTPUT_SPECIFICATION}").unwrap();
    writeln!(p, "The domain is selected from {}.", domains.join(", ")).unwrap();
    writeln!(p, "The intent is selected from {}.", intents.join(", ")).unwrap();
    writeln!(p, "The slot includes {}.", slot_lines(schema).join("; ")).unwrap();
    if let Some((user, system)) = formatting_example(schema) {
        writeln!(p, "Example 1:").unwrap();
        writeln!(p, "USER: {} 3 matches.", render_user(&user)).unwrap();
        writeln!(p, "ASSISTANT: {}", render_system(&system)).unwrap();
    }
    writeln!(p, "Example 2:").unwrap();
    for (i, turn) in history.iter().enumerate() {
        match turn.speaker {
            Speaker::User if i == last_user => {
                writeln!(p, "USER: {} {}.", render_user(&turn.act), render_matches(db)).unwrap()
            }
            Speaker::User => writeln!(p, "USER: {}", render_user(&turn.act)).unwrap(),
            Speaker::System => writeln!(p, "ASSISTANT: {}", render_system(&turn.act)).unwrap(),
        }
    }
    p.push_str("ASSISTANT:");
    Ok(p)
}

/// Contents of every parenthesized group, ignoring groups nested inside another.
fn paren_groups(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = None;
    let mut depth = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '(' => {
                if depth == 0 {
                    start = Some(i + 1);
                }
                depth += 1;
            }
            ')' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    if let Some(s) = start.take() {
                        out.push(&text[s..i]);
                    }
                }
            }
            _ => {}
        }
    }
    out
}

fn clean(field: &str) -> String {
    normalize_name(field.trim().trim_matches(|c| c == '"' || c == '\''))
}

/// Extracts (domain, intent, slot[, value]) tuples from free text. Tuples that
/// name anything outside the schema, or have the wrong arity, are dropped.
/// Requests carry "?"; other intents carry "none" until values are populated.
pub fn parse_llm_reply(text: &str, schema: &Schema) -> DialogueAct {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for group in paren_groups(text) {
        let fields: Vec<&str> = group.split(',').collect();
        if !(fields.len() == 3 || fields.len() == 4) {
            continue;
        }
        let triplet = AtomicAct::new(clean(fields[0]), clean(fields[1]), clean(fields[2]));
        if triplet.validate(schema).is_err() || !seen.insert(triplet.clone()) {
            continue;
        }
        let value = if triplet.intent == REQUEST { REQUEST_VALUE } else { NONE_VALUE };
        out.push(Quadruple::new(triplet.domain, triplet.intent, triplet.slot, value));
    }
    DialogueAct::new(out)
}

/// Sends a prompt, returns the raw completion.
pub trait LlmTransport {
    fn complete(&mut self, prompt: &str) -> Result<String>;
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedReply(pub String);

impl LlmTransport for FixedReply {
    fn complete(&mut self, _: &str) -> Result<String> {
        Ok(self.0.clone())
    }
}

/// One recorded exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub prompt: String,
    pub reply: String,
}

/// Answers from recorded exchanges keyed by the exact prompt.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    replies: HashMap<String, String>,
}

impl ReplayTransport {
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        ReplayTransport {
            replies: entries.into_iter().map(|e| (e.prompt, e.reply)).collect(),
        }
    }

    /// Reads a JSONL file of `{"prompt": …, "reply": …}` records.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| RlError::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| RlError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line).map_err(|e| RlError::Corpus {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(Self::new(entries))
    }
}

impl LlmTransport for ReplayTransport {
    fn complete(&mut self, prompt: &str) -> Result<String> {
        self.replies
            .get(prompt)
            .cloned()
            .ok_or_else(|| RlError::Usage("no recorded reply for this prompt".into()))
    }
}

/// Prompted system policy. Keeps the dialogue history itself because the
/// episode only exposes the latest exchange.
pub struct LlmPolicy<T: LlmTransport> {
    pub transport: T,
    history: Vec<LlmTurn>,
}

impl<T: LlmTransport> LlmPolicy<T> {
    pub fn new(transport: T) -> Self {
        LlmPolicy {
            transport,
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[LlmTurn] {
        &self.history
    }
}

impl<T: LlmTransport> SystemPolicy for LlmPolicy<T> {
    fn respond(&mut self, episode: &Episode, env: &DialogueEnv) -> Result<DialogueAct> {
        // First system turn of a dialogue: the only prior utterance is the opening user act.
        if episode.sim.turn_index <= 1 {
            self.history.clear();
        }
        self.history.push(LlmTurn {
            speaker: Speaker::User,
            act: episode.user_act.clone(),
        });
        let obs = episode.observation(&env.db);
        let prompt = build_llm_prompt(env.schema(), &self.history, &obs.db)?;
        let reply = self.transport.complete(&prompt)?;
        let parsed = parse_llm_reply(&reply, env.schema());
        let act = populate_values(&parsed.triplets(), &env.db, &obs.belief);
        self.history.push(LlmTurn {
            speaker: Speaker::System,
            act: act.clone(),
        });
        Ok(act)
    }
}
