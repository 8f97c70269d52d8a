//! Recurrent, fully-connected and probabilistic forecasters on a small
//! reverse-mode differentiation core.

mod gradcheck;
mod graph;
mod models;
mod train;

pub use gradcheck::{gradient_check, network_loss, relative_error, GradCheckReport, FULL_CHECK_LIMIT};
pub use graph::{Gradients, Graph, Tensor, Var};
pub use models::{
    deepar_step, gru_forward, lstm_forward, nbeats_forward, Architecture, ModelKind, NBeatsConfig, Output, ParamSpec,
    SIGMA_FLOOR,
};
pub use train::{rolling_forecast_neural, sample_median, train, Adam, NeuralConfig, TrainedForecaster, CHECKPOINT_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no training windows")]
    NoWindows,
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("history has {len} values, need at least {needed}")]
    HistoryTooShort { len: usize, needed: usize },
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
