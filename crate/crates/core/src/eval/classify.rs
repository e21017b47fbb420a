use std::collections::{BTreeMap, BTreeSet};

use super::{harmonic_mean, Result};
use crate::clusters::BinaryClusterVector;
use crate::dataset::{load_image, DatasetError, MultimodalSample};
use crate::grad::Tensor;
use crate::text::CooccurrenceTable;
use crate::visual::{predict_clusters, BoundingBox, Network};

/// Cluster id to the classes whose names the text encoder assigns to it.
pub type ClassMap = BTreeMap<usize, BTreeSet<String>>;

/// A decoded evaluation image with its gold annotations.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    /// `[1, 3, S, S]`.
    pub image: Tensor<f32>,
    pub classes: Vec<String>,
    pub boxes: Vec<(String, BoundingBox)>,
}

impl LabeledImage {
    pub fn load(sample: &MultimodalSample) -> std::result::Result<Self, DatasetError> {
        Ok(Self {
            image: load_image(&sample.image_path)?,
            classes: sample.classes.clone(),
            boxes: sample.boxes.clone(),
        })
    }
}

/// Micro-averaged counts over (image, label) pairs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Prf {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
}

impl Prf {
    /// 0 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_positives)
    }

    /// 0 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        ratio(self.true_positives, self.true_positives + self.false_negatives)
    }

    pub fn f1(&self) -> f64 {
        harmonic_mean(self.precision(), self.recall())
    }

    pub fn add(&mut self, other: Prf) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Feed each class name through the text encoder; classes it assigns to no
/// cluster never appear in the map.
pub fn build_class_map<S: AsRef<str>>(class_words: &[S], table: &CooccurrenceTable, threshold: f64) -> ClassMap {
    let mut map = ClassMap::new();
    for w in class_words {
        if let Some(c) = table.assign_word(w.as_ref(), threshold).cluster {
            map.entry(c).or_default().insert(w.as_ref().to_string());
        }
    }
    map
}

/// Union of the classes mapped from the set clusters.
pub fn predict_classes(clusters: &BinaryClusterVector, map: &ClassMap) -> BTreeSet<String> {
    clusters
        .clusters()
        .filter_map(|c| map.get(&c))
        .flatten()
        .cloned()
        .collect()
}

pub fn micro_prf<'a>(pairs: impl IntoIterator<Item = (&'a BTreeSet<String>, &'a BTreeSet<String>)>) -> Prf {
    let mut prf = Prf::default();
    for (predicted, gold) in pairs {
        let tp = predicted.intersection(gold).count() as u64;
        prf.true_positives += tp;
        prf.false_positives += predicted.len() as u64 - tp;
        prf.false_negatives += gold.len() as u64 - tp;
    }
    prf
}

const EVAL_BATCH: usize = 50;

/// Thresholded predictions for each image, in order.
pub(crate) fn predict_images(
    images: &[LabeledImage],
    net: &Network<f32>,
    threshold: f64,
) -> Result<Vec<BinaryClusterVector>> {
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(EVAL_BATCH) {
        let batch: Vec<&Tensor<f32>> = chunk.iter().map(|s| &s.image).collect();
        let probs = net.forward(&Tensor::stack(&batch).map_err(crate::visual::VisualError::from)?)?;
        out.extend(
            probs
                .data()
                .chunks(net.n_clusters())
                .map(|row| predict_clusters(row, threshold)),
        );
    }
    Ok(out)
}

/// Zero-shot multi-label classification through the cluster-to-class map.
pub fn multilabel_eval(images: &[LabeledImage], net: &Network<f32>, map: &ClassMap, threshold: f64) -> Result<Prf> {
    let predictions = predict_images(images, net, threshold)?;
    let predicted: Vec<BTreeSet<String>> = predictions.iter().map(|p| predict_classes(p, map)).collect();
    let gold: Vec<BTreeSet<String>> = images.iter().map(|s| s.classes.iter().cloned().collect()).collect();
    Ok(micro_prf(predicted.iter().zip(&gold)))
}

/// Every image predicted to contain every class.
pub fn all_classes_baseline<S: AsRef<str>>(images: &[LabeledImage], class_words: &[S]) -> Prf {
    let all: BTreeSet<String> = class_words.iter().map(|w| w.as_ref().to_string()).collect();
    let gold: Vec<BTreeSet<String>> = images.iter().map(|s| s.classes.iter().cloned().collect()).collect();
    micro_prf(gold.iter().map(|g| (&all, g)))
}
