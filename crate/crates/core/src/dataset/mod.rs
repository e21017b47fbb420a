//! Image-caption corpora: the synthetic shapes world, the manifest format
//! shared with external corpora, PPM images, and gold resource files.

mod generate;
mod gold;
mod manifest;
mod ppm;
mod world;

pub use generate::{generate_dataset, render_scene, GeneratedDataset, Scene, SceneObject};
pub use gold::{
    association_table, load_associations, load_concreteness, load_taxonomy, save_gold, GoldResources,
};
pub use manifest::{
    load_image, load_manifest, parse_manifest_line, render_manifest_line, MultimodalSample, Split,
};
pub use ppm::{decode_ppm, encode_ppm, RgbImage};
pub use world::{ObjectClass, Shape, Theme, WorldSpec, FUNCTION_WORDS};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: malformed PPM: {reason}")]
    Ppm { path: PathBuf, reason: String },
    #[error("{path} line {line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("sample {index}: {reason}")]
    Sample { index: usize, reason: String },
    #[error("sample {index}: image {path} is missing")]
    MissingImage { index: usize, path: PathBuf },
    #[error("{path} line {line}: {reason}")]
    Gold {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("invalid world spec: {0}")]
    World(String),
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> DatasetError {
    let path = path.into();
    move |source| DatasetError::Io { path, source }
}

pub type Result<T> = std::result::Result<T, DatasetError>;
