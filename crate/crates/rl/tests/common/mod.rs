#![allow(dead_code)]

use wordact_core::{DialogueEnv, RewardConfig};
use wordact_neural::ModelConfig;
use wordact_rl::WordPolicy;

pub fn env() -> DialogueEnv {
    DialogueEnv::toy(RewardConfig::default())
}

/// Small enough for unit-speed tests; long enough for every toy state text.
pub fn tiny() -> ModelConfig {
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

pub fn word_policy(seed: u64) -> WordPolicy {
    WordPolicy::new(env().schema().clone(), tiny(), seed).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
