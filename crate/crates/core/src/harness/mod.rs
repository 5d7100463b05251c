//! Experiment harness: the per-episode runner shared by all controllers,
//! the training loop, evaluation runs and controller comparison, plus the
//! CSV export used by every command.
//!
//! Every output is a pure function of (config, seeds): reruns produce
//! byte-identical files.

mod compare;
mod eval;
mod runner;
mod train;

pub use compare::{run_compare, CompareOptions, ComparisonRow, ComparisonTable};
pub use eval::{run_eval, EvalOptions, EvalOutput};
pub use runner::{ControlLaw, EpisodeRunner, EpisodeSummary, StepRecord};
pub use train::{run_training, TrainOptions, TrainOutput};

use crate::agent::AgentError;
use crate::config::ConfigError;
use crate::rewards::RewardError;
use crate::signal::{ControllerKind, SignalError};
use crate::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("controller `{0}` needs a checkpoint (train it first)")]
    MissingCheckpoint(ControllerKind),
    #[error("{0}")]
    InvalidOption(String),
}

/// Formats one CSV row; fields must not contain commas or newlines.
pub(crate) fn csv_row(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}
