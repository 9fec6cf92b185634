//! HTTP session service for interactive evaluation.
//!
//! Each session is persisted as an append-only JSONL event log under the
//! session directory; the in-memory state is a pure replay of that log.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use wordact_core::acts::{BeliefState, DialogueAct, Quadruple, UserGoal};
use wordact_core::{CoreError, DialogueEnv, Observation};
use wordact_neural::DecodeMode;
use wordact_rl::eval::Speaker;
use wordact_rl::AnyPolicy;

use crate::error::{AppError, Result};
use crate::nlg;

pub const DEFAULT_TURN_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTurn {
    pub speaker: Speaker,
    pub act: DialogueAct,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub model_id: String,
    pub goal: UserGoal,
    pub transcript: Vec<SessionTurn>,
    pub status: Status,
    pub turn_limit: usize,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    #[serde(skip)]
    belief: BeliefState,
    #[serde(skip)]
    last_system_act: DialogueAct,
}

impl Session {
    /// Completed user/system exchanges.
    pub fn turns(&self) -> usize {
        self.transcript.len() / 2
    }

    fn apply(&mut self, event: &Event) -> Result<()> {
        match event {
            Event::Created { .. } => return Err(AppError::Usage(format!("session {}: duplicate creation event", self.id))),
            Event::Turn {
                user_act,
                user_text,
                system_act,
                system_text,
            } => {
                self.belief.update_from_user_act(user_act);
                self.last_system_act = system_act.clone();
                self.transcript.push(SessionTurn {
                    speaker: Speaker::User,
                    act: user_act.clone(),
                    text: user_text.clone(),
                });
                self.transcript.push(SessionTurn {
                    speaker: Speaker::System,
                    act: system_act.clone(),
                    text: system_text.clone(),
                });
            }
            Event::Outcome { success, .. } => {
                self.status = if *success { Status::Success } else { Status::Failure };
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    Created {
        id: String,
        model_id: String,
        goal: UserGoal,
        turn_limit: usize,
        created_at: u64,
    },
    Turn {
        user_act: DialogueAct,
        user_text: String,
        system_act: DialogueAct,
        system_text: String,
    },
    Outcome {
        success: bool,
        /// "judged" for an evaluator verdict, "turn_limit" when forced.
        reason: String,
    },
}

/// A servable checkpoint.
#[derive(Debug, Clone)]
pub struct Model {
    pub id: String,
    pub path: PathBuf,
    pub policy: AnyPolicy,
}

impl Model {
    /// Loads `path`; the id is the file stem.
    pub fn load(path: &Path, env: &DialogueEnv) -> Result<Self> {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| AppError::Usage(format!("{}: checkpoint needs a file name", path.display())))?
            .to_string();
        Ok(Model {
            id,
            path: path.to_path_buf(),
            policy: AnyPolicy::load(path, env.schema().clone())?,
        })
    }

    /// Greedy system act for a state, through the same path as the library.
    pub fn respond(
        &self,
        env: &DialogueEnv,
        user_act: &DialogueAct,
        last_system_act: &DialogueAct,
        belief: &BeliefState,
    ) -> Result<DialogueAct> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(match &self.policy {
            AnyPolicy::Word(p) => p.act(user_act, last_system_act, belief, &env.db, &mut rng, DecodeMode::Greedy)?.act,
            AnyPolicy::Candidate(p) => {
                let obs = Observation {
                    user_act: user_act.clone(),
                    last_system_act: last_system_act.clone(),
                    belief: belief.clone(),
                    db: env.db.match_counts(belief),
                };
                wordact_rl::Agent::decide(p, &obs, &env.db, DecodeMode::Greedy, &mut rng)?.act
            }
        })
    }
}

type SessionHandle = Arc<Mutex<Session>>;

pub struct AppState {
    pub env: DialogueEnv,
    pub models: BTreeMap<String, Model>,
    pub session_dir: PathBuf,
    pub turn_limit: usize,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

impl AppState {
    /// Opens the session directory and replays every stored session.
    pub fn open(env: DialogueEnv, models: Vec<Model>, session_dir: PathBuf, turn_limit: usize) -> Result<Self> {
        if turn_limit == 0 {
            return Err(AppError::Usage("turn limit must be positive".into()));
        }
        std::fs::create_dir_all(&session_dir).map_err(|e| AppError::io(&session_dir, e))?;
        let mut by_id = BTreeMap::new();
        for m in models {
            if by_id.contains_key(&m.id) {
                return Err(AppError::Usage(format!("two checkpoints share the model id `{}`", m.id)));
            }
            by_id.insert(m.id.clone(), m);
        }
        let mut sessions = HashMap::new();
        let entries = std::fs::read_dir(&session_dir).map_err(|e| AppError::io(&session_dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| AppError::io(&session_dir, e))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                let s = replay(&path)?;
                sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
            }
        }
        Ok(AppState {
            env,
            models: by_id,
            session_dir,
            turn_limit,
            sessions: Mutex::new(sessions),
        })
    }

    pub fn session_path(&self, id: &str) -> PathBuf {
        self.session_dir.join(format!("{id}.jsonl"))
    }

    fn session(&self, id: &str) -> std::result::Result<SessionHandle, ApiError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }
}

fn replay(path: &Path) -> Result<Session> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut session: Option<Session> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| AppError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?;
        match (&mut session, event) {
            (None, Event::Created { id, model_id, goal, turn_limit, created_at }) => {
                session = Some(Session {
                    id,
                    model_id,
                    goal,
                    transcript: Vec::new(),
                    status: Status::Active,
                    turn_limit,
                    created_at,
                    belief: BeliefState::default(),
                    last_system_act: DialogueAct::empty(),
                });
            }
            (None, _) => {
                return Err(AppError::Usage(format!("{}: log does not start with a creation event", path.display())))
            }
            (Some(s), e) => s.apply(&e)?,
        }
    }
    session.ok_or_else(|| AppError::Usage(format!("{}: empty session log", path.display())))
}

fn append(path: &Path, event: &Event) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| AppError::io(path, e))?;
    let line = serde_json::to_string(event).expect("event serializes");
    writeln!(f, "{line}").map_err(|e| AppError::io(path, e))
}

/// JSON error body: `{"error": message, "field": offending field or null}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn field(status: StatusCode, field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            field: Some(field.into()),
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "field": self.field}))).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub model_id: String,
    /// Fixes the sampled goal; random when absent.
    #[serde(default)]
    pub goal_seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub goal: UserGoal,
    pub turn_limit: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    pub user_act: Vec<Quadruple>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TurnResponse {
    pub system_act: DialogueAct,
    pub rendered_text: String,
    pub turn_index: usize,
    pub status: Status,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeRequest {
    pub success: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutcomeResponse {
    pub session_id: String,
    pub status: Status,
    pub turns: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub id: String,
    pub kind: String,
    pub path: PathBuf,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", get(list_models))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/turn", post(post_turn))
        .route("/sessions/{id}/outcome", post(post_outcome))
        .with_state(state)
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelInfo>> {
    Json(
        state
            .models
            .values()
            .map(|m| ModelInfo {
                id: m.id.clone(),
                kind: m.policy.kind().to_string(),
                path: m.path.clone(),
            })
            .collect(),
    )
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: std::result::Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<CreateResponse> {
    let Json(req) = body?;
    if !state.models.contains_key(&req.model_id) {
        return Err(ApiError::field(
            StatusCode::BAD_REQUEST,
            "model_id",
            format!("unknown model `{}`", req.model_id),
        ));
    }
    let seed = req.goal_seed.unwrap_or_else(rand::random);
    let goal = state.env.sample_goal(seed).map_err(AppError::from)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created_at = now();
    let created = Event::Created {
        id: id.clone(),
        model_id: req.model_id.clone(),
        goal: goal.clone(),
        turn_limit: state.turn_limit,
        created_at,
    };
    append(&state.session_path(&id), &created)?;
    let session = Session {
        id: id.clone(),
        model_id: req.model_id,
        goal: goal.clone(),
        transcript: Vec::new(),
        status: Status::Active,
        turn_limit: state.turn_limit,
        created_at,
        belief: BeliefState::default(),
        last_system_act: DialogueAct::empty(),
    };
    state
        .sessions
        .lock()
        .expect("session table lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok(Json(CreateResponse {
        session_id: id,
        goal,
        turn_limit: state.turn_limit,
    }))
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Session> {
    let handle = state.session(&id)?;
    let s = handle.lock().expect("session lock").clone();
    Ok(Json(s))
}

fn validation_error(e: CoreError) -> ApiError {
    match e {
        CoreError::Validation { field, detail } => {
            let field = field.strip_prefix("act").map_or(field.clone(), |rest| format!("user_act{rest}"));
            ApiError::field(StatusCode::BAD_REQUEST, field, detail)
        }
        other => ApiError::new(StatusCode::BAD_REQUEST, other.to_string()),
    }
}

async fn post_turn(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<TurnRequest>, JsonRejection>,
) -> ApiResult<TurnResponse> {
    let handle = state.session(&id)?;
    let Json(req) = body?;
    let mut s = handle.lock().expect("session lock");
    if s.status != Status::Active {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("session `{id}` has ended with status {:?}", s.status).to_lowercase(),
        ));
    }
    let user_act = DialogueAct::new(req.user_act);
    if user_act.is_empty() {
        return Err(ApiError::field(StatusCode::BAD_REQUEST, "user_act", "at least one quadruple is required"));
    }
    user_act.validate_user(state.env.schema()).map_err(validation_error)?;
    let model = state.models.get(&s.model_id).ok_or_else(|| {
        ApiError::new(StatusCode::CONFLICT, format!("model `{}` is not loaded", s.model_id))
    })?;
    let mut belief = s.belief.clone();
    belief.update_from_user_act(&user_act);
    let system_act = model.respond(&state.env, &user_act, &s.last_system_act, &belief)?;
    let turn = Event::Turn {
        user_text: nlg::render_user(&user_act),
        user_act,
        system_text: nlg::render_system(&system_act),
        system_act: system_act.clone(),
    };
    let path = state.session_path(&id);
    append(&path, &turn)?;
    s.apply(&turn)?;
    if s.turns() >= s.turn_limit {
        let forced = Event::Outcome {
            success: false,
            reason: "turn_limit".into(),
        };
        append(&path, &forced)?;
        s.apply(&forced)?;
    }
    let rendered_text = s.transcript.last().map(|t| t.text.clone()).unwrap_or_default();
    Ok(Json(TurnResponse {
        system_act,
        rendered_text,
        turn_index: s.turns(),
        status: s.status,
    }))
}

async fn post_outcome(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<OutcomeRequest>, JsonRejection>,
) -> ApiResult<OutcomeResponse> {
    let handle = state.session(&id)?;
    let Json(req) = body?;
    let mut s = handle.lock().expect("session lock");
    if s.status != Status::Active {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            format!("session `{id}` already has an outcome"),
        ));
    }
    let event = Event::Outcome {
        success: req.success,
        reason: "judged".into(),
    };
    append(&state.session_path(&id), &event)?;
    s.apply(&event)?;
    Ok(Json(OutcomeResponse {
        session_id: id,
        status: s.status,
        turns: s.turns(),
    }))
}

/// Binds `port` on all interfaces and serves until the process ends.
pub async fn serve(state: Arc<AppState>, port: u16) -> Result<()> {
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::Usage(format!("cannot bind {addr}: {e}")))?;
    eprintln!("serving {} model(s) on http://{addr}", state.models.len());
    axum::serve(listener, router(state))
        .await
        .map_err(|e| AppError::Usage(format!("server error: {e}")))
}
