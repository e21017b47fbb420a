//! Evaluation protocols and baselines. Gold annotations only enter here,
//! never the training path.

mod classify;
mod clustering;
mod concreteness;
mod kmeans;
mod localize;
mod report;

pub use classify::{
    all_classes_baseline, build_class_map, micro_prf, multilabel_eval, predict_classes, ClassMap, LabeledImage,
    Prf,
};
pub use clustering::{
    clustering_fscore, mean_association_strength, model_clustering, random_clustering, random_clustering_baseline,
    AssociationTable, Clustering, RandomBaseline,
};
pub use concreteness::{
    concreteness_eval, cooccurrence_embeddings, pearson, textonly_concreteness, token_frequencies, BucketResult,
    DEFAULT_BUCKETS,
};
pub use kmeans::{kmeans, textonly_kmeans_clustering, KMeansResult, KMEANS_MAX_ITER};
pub use localize::{iou, localization_eval, match_boxes, predicted_boxes, random_box_baseline, random_boxes};
pub use report::MetricsReport;

use thiserror::Error;

use crate::visual::VisualError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold categories are empty")]
    EmptyGold,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("zero variance")]
    ZeroVariance,
    #[error("need {needed} qualifying words per pole, found {found} in total")]
    TooFewWords { needed: usize, found: usize },
    #[error(transparent)]
    Visual(#[from] VisualError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

pub(crate) fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}
