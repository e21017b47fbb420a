//! Image-side encoder: a small convolutional network ending in global average
//! pooling, one dense layer and an element-wise sigmoid over `N` clusters.

mod bbox;
mod cam;
mod checkpoint;
mod network;

pub use bbox::BoundingBox;
pub use cam::{compute_cam, extract_box, Cam, Heatmap};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint,
    CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use network::{predict_clusters, train_batch, HeadInit, Network, TapedForward};

use thiserror::Error;

use crate::grad::GradError;

#[derive(Debug, Error)]
pub enum VisualError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("invalid image batch: {0}")]
    Images(String),
    #[error("cluster {cluster} out of range for {n_clusters} clusters")]
    ClusterOutOfRange { cluster: usize, n_clusters: usize },
    #[error("{0} targets do not match a batch of {1} images")]
    TargetCount(usize, usize),
}

pub type Result<T> = std::result::Result<T, VisualError>;

/// Encoder hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub n_clusters: usize,
    /// A cluster fires when its sigmoid output is at least this value.
    pub visual_threshold: f64,
    /// Square input side in pixels.
    pub image_size: usize,
    /// Output channels of each 3x3 convolution; every stage but the last is
    /// followed by 2x2 max pooling.
    pub channels: Vec<usize>,
    pub head_init: HeadInit,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            n_clusters: 150,
            visual_threshold: 0.5,
            image_size: 64,
            channels: vec![16, 32, 64],
            head_init: HeadInit::HeUniform,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(VisualError::Config(format!(
                "n_clusters must be at least 2, got {}",
                self.n_clusters
            )));
        }
        if !(self.visual_threshold > 0.0 && self.visual_threshold < 1.0) {
            return Err(VisualError::Config(format!(
                "visual_threshold must lie in (0, 1), got {}",
                self.visual_threshold
            )));
        }
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(VisualError::Config(format!(
                "channel widths must be non-empty and positive, got {:?}",
                self.channels
            )));
        }
        let pools = self.channels.len() - 1;
        if self.image_size == 0 || self.image_size % (1 << pools) != 0 {
            return Err(VisualError::Config(format!(
                "image_size {} must be a positive multiple of {}",
                self.image_size,
                1 << pools
            )));
        }
        Ok(())
    }

    /// Side of the final feature map (the CAM resolution).
    pub fn feature_size(&self) -> usize {
        self.image_size >> (self.channels.len() - 1)
    }
}

/// Input images are `[batch, 3, S, S]` with values in `[0, 1]`.
pub const IMAGE_CHANNELS: usize = 3;
