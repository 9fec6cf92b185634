use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use wordact_core::{DialogueEnv, RewardConfig};
use wordact_neural::ModelConfig;
use wordact_rl::WordPolicy;

fn wordact(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wordact"))
        .args(args)
        .current_dir(dir)
        .env_remove("WORDACT__PPO__TOTAL_FRAMES")
        .output()
        .expect("binary runs")
}

fn small_config() -> Value {
    json!({
        "model": {"hidden_size": 16, "layers": 1, "heads": 2, "ff_size": 32, "max_decode_len": 12, "max_text_len": 48},
        "warmup": {"train_turns": 200, "valid_turns": 50, "epochs": 3, "patience": 3, "lr": 3e-3},
        "ppo": {"actor_lr": 1e-4, "critic_lr": 1e-3, "eval_episodes": 10, "eval_every_frames": 512},
        "eval": {"episodes": 10}
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), small_config().to_string()).unwrap();
    let common = ["--config", "run.json", "--run-dir", "run", "--seed", "3"];
    let step = |cmd: &[&str]| {
        let mut args: Vec<&str> = cmd.to_vec();
        args.extend(common);
        let out = wordact(dir.path(), &args);
        assert!(out.status.success(), "{cmd:?}: {}", stderr(&out));
        out
    };
    let run = dir.path().join("run");

    step(&["gen-data"]);
    assert_eq!(std::fs::read_to_string(run.join("train.jsonl")).unwrap().lines().count(), 200);
    let snapshot: Value = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["seed"], 3);
    assert_eq!(snapshot["ppo"]["seed"], 3);
    assert_eq!(snapshot["model"]["hidden_size"], 16);

    step(&["warmup"]);
    assert!(run.join("warmup.ckpt").exists());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(run.join("warmup.json")).unwrap()).unwrap();
    assert!(report["valid_exact_match"].as_f64().is_some());

    let start = Instant::now();
    step(&["train-ppo", "--frames", "512"]);
    assert!(start.elapsed() < Duration::from_secs(120));
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("frame,success_rate,avg_turns,avg_reward,seed"));
    assert!(run.join("ppo.ckpt").exists());
    let snapshot: Value = serde_json::from_str(&std::fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    assert_eq!(snapshot["ppo"]["total_frames"], 512);

    step(&["evaluate"]);
    let eval: Value = serde_json::from_str(&std::fs::read_to_string(run.join("eval.json")).unwrap()).unwrap();
    assert_eq!(eval["n_episodes"], 10);
    assert_eq!(std::fs::read_to_string(run.join("transcripts.jsonl")).unwrap().lines().count(), 10);

    step(&["simulate"]);
    let dump = std::fs::read_to_string(run.join("simulate.jsonl")).unwrap();
    assert_eq!(dump.lines().count(), 10);
}

#[test]
fn missing_schema_file_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), json!({"schema": "nowhere/schema.json"}).to_string()).unwrap();
    let out = wordact(dir.path(), &["gen-data", "--config", "bad.json", "--run-dir", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere/schema.json"), "{}", stderr(&out));
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), json!({"ppo": {"clip_eps": 3.0}}).to_string()).unwrap();
    let out = wordact(dir.path(), &["gen-data", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("clip_eps"), "{}", stderr(&out));
}

#[test]
fn missing_checkpoint_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = wordact(dir.path(), &["evaluate", "--checkpoint", "absent.ckpt", "--run-dir", "run"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.ckpt"), "{}", stderr(&out));
}

#[test]
fn diverged_checkpoint_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), small_config().to_string()).unwrap();
    let model: ModelConfig = serde_json::from_value(json!({
        "vocab_size": 0, "hidden_size": 16, "layers": 1, "heads": 2, "ff_size": 32, "max_decode_len": 12, "max_text_len": 48
    }))
    .unwrap();
    let env = DialogueEnv::toy(RewardConfig::default());
    let mut policy = WordPolicy::new(env.schema().clone(), model, 0).unwrap();
    *policy.model.actor.scalar_mut(0) = f64::NAN;
    policy.save(&dir.path().join("nan.ckpt")).unwrap();
    let out = wordact(
        dir.path(),
        &["train-ppo", "--config", "run.json", "--checkpoint", "nan.ckpt", "--frames", "64", "--run-dir", "run"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"), "{}", stderr(&out));
}

#[test]
fn bundled_desk_config_matches_the_library_preset() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/desk.json");
    let text = std::fs::read_to_string(path).unwrap();
    let cfg = wordact_rl::RunConfig::from_json_with_overrides(&text, Vec::new()).unwrap();
    assert_eq!(cfg, wordact_rl::RunConfig::desk());
}
