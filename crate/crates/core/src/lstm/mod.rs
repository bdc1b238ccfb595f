//! Stacked LSTM sequence-to-sequence regressor.
//!
//! Each recurrent step sees `tau` consecutive samples of every input channel
//! (see [`resample`]) and the linear head emits `tau` samples of every output
//! channel, so a window of `N` samples runs through `N / tau` cell updates.
//!
//! Gate naming follows the cell equations: `f1` forget, `f2` input, `f3`
//! candidate (tanh), `f4` output. Parameters of the four gates are stacked
//! row-wise in that order.

mod cell;
mod io;
mod network;
mod resample;
mod train;

pub use cell::{cell_forward, Gate, LstmCellParams, LstmState};
pub use io::{MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use network::{
    batch_loss_and_gradient, loss, loss_and_gradient, mse, ChannelScale, LinearHead,
    LstmNetwork, NetworkConfig, Normalization, Parameters,
};
pub use resample::{resample, unresample, Matrix};
pub use train::{
    train, train_with_observer, Adam, EarlyStopping, EpochRecord, StopReason, TrainingHistory,
    TrainingSample,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("series of {len} samples is shorter than tau = {tau}")]
    TooShort { len: usize, tau: usize },
    #[error("empty dataset: {0}")]
    Empty(String),
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
