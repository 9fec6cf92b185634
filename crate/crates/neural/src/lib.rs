//! Small differentiable sequence models in `f64`.
//!
//! [`tape::Tape`] records matrix operations during a forward pass and runs
//! reverse-mode differentiation over them. On top of it sit pre-norm
//! transformer layers, the actor (state-text encoder, action encoder and
//! autoregressive decoder) and the critic.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod params;
pub mod tape;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use error::{NeuralError, Result};
pub use model::{ActorNet, CandidateNet, CriticNet, DecodeMode, Generated, ModelConfig, PolicyModel, STATE_TEXTS};
pub use optim::{Adam, AdamConfig};
pub use params::{Grads, ParamId, ParamSet};
pub use tape::{Tape, Var};
pub use tensor::Mat;
