#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(f64),

    #[error("backward already ran on this tape")]
    TapeConsumed,

    #[error("invalid model config: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;
