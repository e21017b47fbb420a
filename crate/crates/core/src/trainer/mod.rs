//! Mutual-supervision training: within each step both encoders infer from
//! their pre-step state, then the counts table learns from the image
//! predictions and the network learns from the caption predictions.

mod config;
mod fit;
mod log;

pub use config::{parse_config, render_config, ConfigError, TrainConfig};
pub use fit::{fit, load_train_samples, train_step, FitResult, Model, StepEvent, StepOutcome, TrainSample};
pub use log::{EpochLog, StepLog, TrainLog};

use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::grad::GradError;
use crate::text::{CountsError, TextError};
use crate::visual::{CheckpointError, VisualError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Visual(#[from] VisualError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("writing checkpoint: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("writing counts: {0}")]
    Counts(#[from] CountsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    EmptyBatch(&'static str),
}

/// Lowercase, split on Unicode whitespace, and strip characters outside
/// `[a-z0-9]` from both ends of each piece. Interior punctuation survives,
/// so `don't` stays one token.
pub fn tokenize(caption: &str) -> Vec<String> {
    caption
        .to_lowercase()
        .split_whitespace()
        .map(|piece| {
            piece
                .trim_matches(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit()))
                .to_string()
        })
        .filter(|t| !t.is_empty())
        .collect()
}
