mod common;

use common::{env, word_policy};
use wordact_rl::eval::{evaluate, run_episode, write_transcripts, AgentSystem, EmptySystem, OracleSystem, Speaker};

#[test]
fn silent_policy_fails_every_dialogue_at_the_turn_limit() {
    let (report, transcripts) = evaluate(&mut EmptySystem, &env(), 20, 1).unwrap();
    assert_eq!(report.success_rate, 0.0);
    assert_eq!(report.avg_turns, 40.0);
    assert_eq!(report.avg_reward, -60.0);
    assert!(transcripts.iter().all(|t| t.system_turns() == 20));
}

#[test]
fn oracle_succeeds_on_seeded_goals() {
    let (report, transcripts) = evaluate(&mut OracleSystem, &env(), 200, 2).unwrap();
    assert!(report.success_rate >= 0.95, "{}", report.success_rate);
    for t in &transcripts {
        assert_eq!(t.turns.first().unwrap().speaker, Speaker::User);
        if t.success {
            assert!((t.reward - (80.0 - t.system_turns() as f64)).abs() < 1e-12);
        }
    }
}

#[test]
fn report_statistics_are_transcript_averages() {
    let agent = word_policy(3);
    let mut sys = AgentSystem::greedy(&agent);
    let (report, transcripts) = evaluate(&mut sys, &env(), 12, 4).unwrap();
    let n = transcripts.len() as f64;
    let successes = transcripts.iter().filter(|t| t.success).count() as f64;
    assert_eq!(report.success_rate, successes / n);
    let reward: f64 = transcripts
        .iter()
        .map(|t| if t.success { 80.0 } else { -40.0 } - t.system_turns() as f64)
        .sum::<f64>()
        / n;
    assert!((report.avg_reward - reward).abs() < 1e-9);
    assert!(report.avg_turns <= 40.0);
}

#[test]
fn evaluation_is_reproducible() {
    let agent = word_policy(4);
    let a = evaluate(&mut AgentSystem::greedy(&agent), &env(), 5, 9).unwrap();
    let b = evaluate(&mut AgentSystem::greedy(&agent), &env(), 5, 9).unwrap();
    assert_eq!(a, b);
    let one = run_episode(&mut OracleSystem, &env(), 0, 77).unwrap();
    assert_eq!(one, run_episode(&mut OracleSystem, &env(), 0, 77).unwrap());
}

#[test]
fn zero_episodes_is_a_usage_error() {
    assert!(evaluate(&mut OracleSystem, &env(), 0, 0).is_err());
}

#[test]
fn transcripts_are_jsonl() {
    let (_, transcripts) = evaluate(&mut OracleSystem, &env(), 3, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    write_transcripts(&path, &transcripts).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back: Vec<wordact_rl::Transcript> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(back, transcripts);
}
