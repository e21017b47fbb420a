//! Count-based word clustering.
//!
//! The table records, for every cluster `c`, how many captions were paired
//! with an image predicted to be in `c`, and for every word `w` how many of
//! those captions contained `w`. `P(w|c)` is the ratio of the two; with a
//! uniform cluster prior, `P(c|w)` is `P(w|c)` normalised over clusters.

mod persist;

pub use persist::{load_counts, parse_counts, render_counts, save_counts, CountsError};

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::clusters::BinaryClusterVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("cluster vector has length {got}, table has {expected} clusters")]
    ClusterCount { expected: usize, got: usize },
    #[error("text threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextConfig {
    /// A word is assigned to its best cluster only when `max_c P(c|w)` reaches this value.
    pub text_threshold: f64,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self { text_threshold: 0.08 }
    }
}

impl TextConfig {
    pub fn validate(&self) -> Result<(), TextError> {
        if self.text_threshold > 0.0 && self.text_threshold < 1.0 {
            Ok(())
        } else {
            Err(TextError::Threshold(self.text_threshold))
        }
    }
}

/// Result of `f(w)`: at most one cluster per word type.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAssignment {
    pub word: String,
    pub cluster: Option<usize>,
    pub max_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceTable {
    n_clusters: usize,
    cluster_counts: Vec<u64>,
    joint: BTreeMap<String, Vec<u64>>,
}

impl CooccurrenceTable {
    pub fn new(n_clusters: usize) -> Self {
        Self {
            n_clusters,
            cluster_counts: vec![0; n_clusters],
            joint: BTreeMap::new(),
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// `count(c)`.
    pub fn cluster_count(&self, cluster: usize) -> u64 {
        self.cluster_counts.get(cluster).copied().unwrap_or(0)
    }

    /// `count(w, c)`.
    pub fn joint_count(&self, word: &str, cluster: usize) -> u64 {
        self.joint
            .get(word)
            .and_then(|row| row.get(cluster))
            .copied()
            .unwrap_or(0)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.joint.keys().map(String::as_str)
    }

    pub fn vocabulary_size(&self) -> usize {
        self.joint.len()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.joint.contains_key(word)
    }

    /// Number of non-zero `(word, cluster)` counts.
    pub fn nonzero_joint_entries(&self) -> usize {
        self.joint.values().flatten().filter(|&&c| c > 0).count()
    }

    pub(crate) fn raw_parts(&self) -> (&[u64], &BTreeMap<String, Vec<u64>>) {
        (&self.cluster_counts, &self.joint)
    }

    pub(crate) fn from_raw_parts(cluster_counts: Vec<u64>, joint: BTreeMap<String, Vec<u64>>) -> Self {
        Self {
            n_clusters: cluster_counts.len(),
            cluster_counts,
            joint,
        }
    }

    /// Record one caption paired with the clusters its image was predicted
    /// to belong to. Repeated tokens in a caption count once.
    pub fn observe<S: AsRef<str>>(
        &mut self,
        tokens: &[S],
        visual_clusters: &BinaryClusterVector,
    ) -> Result<(), TextError> {
        if visual_clusters.len() != self.n_clusters {
            return Err(TextError::ClusterCount {
                expected: self.n_clusters,
                got: visual_clusters.len(),
            });
        }
        let types: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
        for c in visual_clusters.clusters() {
            self.cluster_counts[c] += 1;
        }
        for w in types {
            let n = self.n_clusters;
            let row = self.joint.entry(w.to_string()).or_insert_with(|| vec![0; n]);
            for c in visual_clusters.clusters() {
                row[c] += 1;
            }
        }
        Ok(())
    }

    /// `P(w|c)`; zero when `c` was never predicted.
    pub fn p_word_given_cluster(&self, word: &str, cluster: usize) -> f64 {
        let total = self.cluster_count(cluster);
        if total == 0 {
            0.0
        } else {
            self.joint_count(word, cluster) as f64 / total as f64
        }
    }

    /// `(count(w,c), count(c))` pairs with a non-zero numerator.
    fn ratios<'a>(&'a self, word: &str) -> impl Iterator<Item = (usize, u64, u64)> + 'a {
        let row = self.joint.get(word);
        (0..self.n_clusters).filter_map(move |c| {
            let j = row.map_or(0, |r| r[c]);
            (j > 0).then(|| (c, j, self.cluster_counts[c]))
        })
    }

    /// `P(c|w)` for every cluster under a uniform prior. All zeros when the
    /// word never co-occurred with a predicted cluster; otherwise the values
    /// summed left to right in `f64` give exactly `1.0`.
    pub fn p_cluster_given_word(&self, word: &str) -> Vec<f64> {
        let mut p: Vec<f64> = (0..self.n_clusters)
            .map(|c| self.p_word_given_cluster(word, c))
            .collect();
        let total: f64 = p.iter().sum();
        if total == 0.0 {
            return p;
        }
        let last = p.iter().rposition(|&x| x > 0.0).expect("non-zero total");
        let mut prefix = 0.0;
        for x in &mut p[..last] {
            *x /= total;
            prefix += *x;
        }
        // Closing the sum on the last entry makes the left-to-right total exact.
        p[last] = 1.0 - prefix;
        debug_assert!(p[last] > 0.0);
        p
    }

    /// Highest-probability cluster (smallest index on exact ties) and
    /// whether its probability reaches `threshold`.
    fn best_cluster(&self, word: &str, threshold: f64) -> Option<(usize, f64, bool)> {
        let mut best: Option<(usize, u64, u64)> = None;
        for (c, j, n) in self.ratios(word) {
            // j/n > bj/bn, compared exactly.
            if best.is_none_or(|(_, bj, bn)| j as u128 * bn as u128 > bj as u128 * n as u128) {
                best = Some((c, j, n));
            }
        }
        let (c, j, n) = best?;
        let p = self.p_cluster_given_word(word);
        let max_p = p[c];
        let passes = if (max_p - threshold).abs() > 1e-9 {
            max_p >= threshold
        } else {
            // Too close to call in floating point: decide with exact rationals.
            let ratio = |j: u64, n: u64| BigRational::new(BigInt::from(j), BigInt::from(n));
            let total = self
                .ratios(word)
                .fold(BigRational::zero(), |acc, (_, j, n)| acc + ratio(j, n));
            match BigRational::from_float(threshold) {
                Some(t) => ratio(j, n) >= t * total,
                None => false,
            }
        };
        Some((c, max_p, passes))
    }

    /// `f(w)`: the most probable cluster when its probability is at least
    /// `threshold`, otherwise no cluster.
    pub fn assign_word(&self, word: &str, threshold: f64) -> WordAssignment {
        let (cluster, max_probability) = match self.best_cluster(word, threshold) {
            Some((c, p, true)) => (Some(c), p),
            Some((_, p, false)) => (None, p),
            None => (None, 0.0),
        };
        WordAssignment {
            word: word.to_string(),
            cluster,
            max_probability,
        }
    }

    /// Union of the clusters the caption's words are assigned to.
    pub fn encode_sentence<S: AsRef<str>>(&self, tokens: &[S], threshold: f64) -> BinaryClusterVector {
        BinaryClusterVector::from_clusters(
            self.n_clusters,
            tokens
                .iter()
                .filter_map(|t| self.assign_word(t.as_ref(), threshold).cluster),
        )
    }

    /// `max_c P(c|w)`; zero for words never seen with a cluster.
    pub fn concreteness(&self, word: &str) -> f64 {
        self.p_cluster_given_word(word)
            .into_iter()
            .fold(0.0, f64::max)
    }
}
