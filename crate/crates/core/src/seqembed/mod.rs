//! Variational recurrent autoencoder over event-type sequences.
//!
//! An LSTM encoder reads one-hot events; its last hidden state is mapped to
//! the mean and log standard deviation of a diagonal Gaussian. A sample
//! `z = μ + σ ⊙ ε` initializes the decoder LSTM through `tanh(W_z z + b_z)`;
//! the decoder runs on zero inputs and emits per-step sigmoid
//! reconstructions. Training minimizes reconstruction MSE plus a weighted
//! KL divergence to the standard normal prior. The embedding of a sequence
//! is its posterior mean.

mod checkpoint;
mod lstm;
mod model;
mod train;

use thiserror::Error;

pub use checkpoint::{from_bytes, load_model, save_model, to_bytes, FORMAT_VERSION, MAGIC};
pub use lstm::{lstm_step, LstmParams};
pub use model::{
    gaussian_kl, one_hot, preprocess, sample_latent, DecoderParams, Encoded, LatentHead,
    LossBreakdown, ModelShape, VraeModel, VraeParams, EVENT_DIM, INIT_SCALE,
};
pub use train::{epsilon_for, train, write_train_log, Adam, EpochLoss, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("empty event sequence")]
    EmptySequence,
    #[error("sequence of length {len} exceeds the model limit {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no usable training sequences")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
