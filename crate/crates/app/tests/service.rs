use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use wordact_app::service::{router, AppState, Model, DEFAULT_TURN_LIMIT};
use wordact_core::acts::{BeliefState, DialogueAct};
use wordact_core::{DialogueEnv, RewardConfig};
use wordact_neural::{DecodeMode, ModelConfig};
use wordact_rl::WordPolicy;

fn env() -> DialogueEnv {
    DialogueEnv::toy(RewardConfig::default())
}

fn tiny() -> ModelConfig {
    ModelConfig {
        vocab_size: 0,
        hidden_size: 16,
        layers: 1,
        heads: 2,
        ff_size: 32,
        max_decode_len: 12,
        max_text_len: 48,
    }
}

/// Writes `policy-a.ckpt` into `dir` and returns its path.
fn checkpoint(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("policy-a.ckpt");
    WordPolicy::new(env().schema().clone(), tiny(), 4).unwrap().save(&path).unwrap();
    path
}

fn app(dir: &Path, ckpt: &Path, turn_limit: usize) -> Router {
    let env = env();
    let model = Model::load(ckpt, &env).unwrap();
    router(Arc::new(AppState::open(env, vec![model], dir.join("sessions"), turn_limit).unwrap()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, seed: u64) -> String {
    let (status, body) = call(app, "POST", "/sessions", Some(json!({"model_id": "policy-a", "goal_seed": seed}))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

fn user_turns() -> Vec<Value> {
    vec![
        json!([["restaurant", "inform", "area", "centre"]]),
        json!([["restaurant", "inform", "food", "italian"], ["restaurant", "request", "phone", "?"]]),
        json!([["restaurant", "request", "address", "?"]]),
        json!([["hotel", "inform", "area", "north"]]),
        json!([["hotel", "request", "postcode", "?"]]),
    ]
}

#[tokio::test]
async fn happy_path_persists_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &checkpoint(dir.path()), DEFAULT_TURN_LIMIT);
    let (status, models) = call(&app, "GET", "/models", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(models[0]["id"], "policy-a");
    assert_eq!(models[0]["kind"], "word");

    let id = create(&app, 3).await;
    let (status, turn) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"user_act": user_turns()[0]}))).await;
    assert_eq!(status, StatusCode::OK, "{turn}");
    assert_eq!(turn["turn_index"], 1);
    assert_eq!(turn["status"], "active");
    assert!(turn["rendered_text"].as_str().is_some_and(|t| !t.is_empty()));

    let (status, out) = call(&app, "POST", &format!("/sessions/{id}/outcome"), Some(json!({"success": true}))).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["status"], "success");

    let (status, session) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(session["status"], "success");
    let transcript = session["transcript"].as_array().unwrap();
    assert_eq!(transcript.len(), 2);
    assert_eq!(transcript[0]["speaker"], "user");
    assert_eq!(transcript[1]["speaker"], "system");
    assert_eq!(transcript[1]["act"], turn["system_act"]);

    let log = std::fs::read_to_string(dir.path().join("sessions").join(format!("{id}.jsonl"))).unwrap();
    let events: Vec<Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let kinds: Vec<&str> = events.iter().map(|e| e["event"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["created", "turn", "outcome"]);
}

#[tokio::test]
async fn turn_limit_forces_failure_then_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &checkpoint(dir.path()), DEFAULT_TURN_LIMIT);
    let id = create(&app, 1).await;
    let body = json!({"user_act": [["hotel", "request", "phone", "?"]]});
    for k in 1..=DEFAULT_TURN_LIMIT {
        let (status, turn) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(body.clone())).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(turn["turn_index"], k);
        let expected = if k == DEFAULT_TURN_LIMIT { "failure" } else { "active" };
        assert_eq!(turn["status"], expected);
    }
    let (status, err) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(body)).await;
    assert_eq!(status, StatusCode::CONFLICT, "{err}");
    let (_, session) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(session["status"], "failure");
    assert_eq!(session["transcript"].as_array().unwrap().len(), 2 * DEFAULT_TURN_LIMIT);
    // The forced verdict is final.
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/outcome"), Some(json!({"success": true}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
}

#[tokio::test]
async fn invalid_requests_are_rejected_with_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &checkpoint(dir.path()), DEFAULT_TURN_LIMIT);
    let id = create(&app, 2).await;
    let turn = format!("/sessions/{id}/turn");

    let (status, err) = call(&app, "POST", &turn, Some(json!({"user_act": [["hotel", "inform", "area", "north"], ["hotel", "inform", "stars", "4"]]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "user_act[1].slot");
    assert!(err["error"].as_str().unwrap().contains("stars"), "{err}");

    let (status, err) = call(&app, "POST", &turn, Some(json!({"user_act": [["hotel", "inform", "area", "mars"]]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "user_act[0].value");

    let (status, err) = call(&app, "POST", &turn, Some(json!({"user_act": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "user_act");

    let (status, _) = call(&app, "POST", &turn, Some(json!({"act": []}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, err) = call(&app, "POST", "/sessions", Some(json!({"model_id": "nope"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["field"], "model_id");

    // Rejected turns leave no trace.
    let (_, session) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert!(session["transcript"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn unknown_session_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &checkpoint(dir.path()), DEFAULT_TURN_LIMIT);
    let (status, _) = call(&app, "GET", "/sessions/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions/missing/turn", Some(json!({"user_act": [["hotel", "request", "phone", "?"]]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", "/sessions/missing/outcome", Some(json!({"success": false}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = checkpoint(dir.path());
    let first = app(dir.path(), &ckpt, DEFAULT_TURN_LIMIT);
    let id = create(&first, 5).await;
    for ua in &user_turns()[..2] {
        call(&first, "POST", &format!("/sessions/{id}/turn"), Some(json!({"user_act": ua}))).await;
    }
    let (_, before) = call(&first, "GET", &format!("/sessions/{id}"), None).await;
    drop(first);

    let second = app(dir.path(), &ckpt, DEFAULT_TURN_LIMIT);
    let (status, after) = call(&second, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);

    // The replayed state continues exactly as an uninterrupted session would.
    let third_turn = json!({"user_act": user_turns()[2]});
    let (_, resumed) = call(&second, "POST", &format!("/sessions/{id}/turn"), Some(third_turn.clone())).await;
    let control_dir = tempfile::tempdir().unwrap();
    let control = app(control_dir.path(), &ckpt, DEFAULT_TURN_LIMIT);
    let cid = create(&control, 5).await;
    let mut last = Value::Null;
    for ua in &user_turns()[..3] {
        last = call(&control, "POST", &format!("/sessions/{cid}/turn"), Some(json!({"user_act": ua}))).await.1;
    }
    assert_eq!(resumed, last);
}

#[tokio::test]
async fn service_acts_match_library_replay() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = checkpoint(dir.path());
    let app = app(dir.path(), &ckpt, DEFAULT_TURN_LIMIT);
    let id = create(&app, 9).await;
    let env = env();
    let policy = WordPolicy::load(&ckpt, env.schema().clone()).unwrap();
    let mut belief = BeliefState::default();
    let mut last_system = DialogueAct::empty();
    for ua in user_turns() {
        let (status, turn) = call(&app, "POST", &format!("/sessions/{id}/turn"), Some(json!({"user_act": ua}))).await;
        assert_eq!(status, StatusCode::OK);
        let user_act: DialogueAct = serde_json::from_value(ua).unwrap();
        belief.update_from_user_act(&user_act);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let expected = policy
            .act(&user_act, &last_system, &belief, &env.db, &mut rng, DecodeMode::Greedy)
            .unwrap()
            .act;
        let served: DialogueAct = serde_json::from_value(turn["system_act"].clone()).unwrap();
        assert_eq!(served, expected);
        last_system = expected;
    }
}

#[tokio::test]
async fn concurrent_sessions_are_independent() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path(), &checkpoint(dir.path()), DEFAULT_TURN_LIMIT);
    let a = create(&app, 1).await;
    let b = create(&app, 1).await;
    assert_ne!(a, b);
    call(&app, "POST", &format!("/sessions/{a}/turn"), Some(json!({"user_act": user_turns()[0]}))).await;
    call(&app, "POST", &format!("/sessions/{a}/outcome"), Some(json!({"success": false}))).await;
    let (_, sb) = call(&app, "GET", &format!("/sessions/{b}"), None).await;
    assert_eq!(sb["status"], "active");
    assert!(sb["transcript"].as_array().unwrap().is_empty());
}
