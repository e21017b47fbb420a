use std::collections::{BTreeMap, BTreeSet};

use super::{EvalError, Result};
use crate::text::CooccurrenceTable;

pub const DEFAULT_BUCKETS: [u64; 4] = [1, 10, 50, 100];

/// Product-moment correlation. Rejects fewer than two points and constant
/// series.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(EvalError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(EvalError::TooFewPoints(xs.len()));
    }
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if constant(xs) || constant(ys) {
        return Err(EvalError::ZeroVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Token occurrence counts over a tokenized corpus.
pub fn token_frequencies(captions: &[Vec<String>]) -> BTreeMap<String, u64> {
    let mut freq = BTreeMap::new();
    for caption in captions {
        for t in caption {
            *freq.entry(t.clone()).or_insert(0) += 1;
        }
    }
    freq
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketResult {
    pub min_freq: u64,
    pub words: usize,
    /// `None` when the bucket has fewer than two words or a constant side.
    pub pearson: Option<f64>,
}

/// Pearson correlation between `max_c P(c|w)` and the gold rating, over gold
/// words with corpus frequency at least each threshold.
pub fn concreteness_eval(
    table: &CooccurrenceTable,
    gold: &BTreeMap<String, f64>,
    frequencies: &BTreeMap<String, u64>,
    min_freqs: &[u64],
) -> Result<Vec<BucketResult>> {
    if min_freqs.windows(2).any(|w| w[0] > w[1]) {
        return Err(EvalError::InvalidArgument(format!(
            "frequency thresholds must be ascending, got {min_freqs:?}"
        )));
    }
    Ok(min_freqs
        .iter()
        .map(|&min_freq| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = gold
                .iter()
                .filter(|(w, _)| frequencies.get(*w).copied().unwrap_or(0) >= min_freq)
                .map(|(w, &g)| (table.concreteness(w), g))
                .unzip();
            BucketResult {
                min_freq,
                words: xs.len(),
                pearson: pearson(&xs, &ys).ok(),
            }
        })
        .collect())
}

/// Sparse L2-normalised rows of the caption-level co-occurrence matrix: entry
/// `(i, j)`, `i != j`, counts the captions containing both types. Returns the
/// sorted vocabulary and one row per word as `(column, value)` pairs sorted by
/// column. A word that never shares a caption gets an empty row.
pub fn cooccurrence_embeddings(captions: &[Vec<String>]) -> (Vec<String>, Vec<Vec<(usize, f64)>>) {
    let vocab: Vec<String> = captions
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut counts: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); vocab.len()];
    for caption in captions {
        let types: BTreeSet<usize> = caption.iter().map(|w| index[w.as_str()]).collect();
        for &i in &types {
            for &j in &types {
                if i != j {
                    *counts[i].entry(j).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    let rows = counts
        .into_iter()
        .map(|row| {
            let norm = row.values().map(|v| v * v).sum::<f64>().sqrt();
            row.into_iter().map(|(j, v)| (j, v / norm)).collect()
        })
        .collect();
    (vocab, rows)
}

fn sparse_dot(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    dot
}

/// Text-only concreteness: mean cosine similarity to the `n_representatives`
/// most concrete gold words minus mean cosine similarity to the
/// `n_representatives` least concrete ones. Representatives must occur more
/// than `min_count` times. Scores every corpus word.
pub fn textonly_concreteness(
    captions: &[Vec<String>],
    gold: &BTreeMap<String, f64>,
    n_representatives: usize,
    min_count: u64,
) -> Result<BTreeMap<String, f64>> {
    if n_representatives == 0 {
        return Err(EvalError::InvalidArgument("need at least one representative per pole".into()));
    }
    let freq = token_frequencies(captions);
    let mut qualifying: Vec<(&String, f64)> = gold
        .iter()
        .filter(|(w, _)| freq.get(*w).copied().unwrap_or(0) > min_count)
        .map(|(w, &r)| (w, r))
        .collect();
    if qualifying.len() < 2 * n_representatives {
        return Err(EvalError::TooFewWords {
            needed: n_representatives,
            found: qualifying.len(),
        });
    }
    qualifying.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (vocab, rows) = cooccurrence_embeddings(captions);
    let row_of = |w: &str| &rows[vocab.binary_search_by(|v| v.as_str().cmp(w)).expect("frequent word in vocab")];
    let concrete: Vec<&[(usize, f64)]> = qualifying[..n_representatives].iter().map(|(w, _)| &row_of(w)[..]).collect();
    let abstract_: Vec<&[(usize, f64)]> = qualifying[qualifying.len() - n_representatives..]
        .iter()
        .map(|(w, _)| &row_of(w)[..])
        .collect();
    let n = n_representatives as f64;
    Ok(vocab
        .iter()
        .zip(&rows)
        .map(|(w, row)| {
            let c: f64 = concrete.iter().map(|r| sparse_dot(row, r)).sum::<f64>() / n;
            let a: f64 = abstract_.iter().map(|r| sparse_dot(row, r)).sum::<f64>() / n;
            (w.clone(), c - a)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines.iter().map(|l| l.split(' ').map(str::to_string).collect()).collect()
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&xs, &[1.0, 2.0, 4.0]).unwrap() - 0.981_980_506_061_965_7).abs() < 1e-12);
        assert!(matches!(pearson(&xs, &[0.1, 0.1, 0.1]), Err(EvalError::ZeroVariance)));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(EvalError::TooFewPoints(1))));
        assert!(matches!(pearson(&xs, &[1.0]), Err(EvalError::LengthMismatch(3, 1))));
    }

    #[test]
    fn embeddings_are_caption_level_and_normalised() {
        let (vocab, rows) = cooccurrence_embeddings(&corpus(&["x y y", "x z", "w"]));
        assert_eq!(vocab, ["w", "x", "y", "z"]);
        assert!(rows[0].is_empty());
        let s = 1.0 / 2f64.sqrt();
        assert_eq!(rows[1], vec![(2, s), (3, s)]);
        assert_eq!(rows[2], vec![(1, 1.0)]);
    }

    #[test]
    fn textonly_hand_cosines() {
        // Rows: p=(0,1,1)/sqrt2 over (p,q,r), q=(1,0,1)/sqrt2, r=(1,1,0)/sqrt2 plus
        // an extra caption; with one representative per pole the score of a
        // word is cos(w, p) - cos(w, r).
        let captions = corpus(&["p q r", "p r"]);
        let gold: BTreeMap<String, f64> = [("p", 1.0), ("r", 0.0)].map(|(w, r)| (w.to_string(), r)).into();
        let scores = textonly_concreteness(&captions, &gold, 1, 0).unwrap();
        // counts: p:{q1,r2}, q:{p1,r1}, r:{p2,q1}
        let n5 = 5f64.sqrt();
        let p = [0.0, 1.0 / n5, 2.0 / n5];
        let q = [1.0 / 2f64.sqrt(), 0.0, 1.0 / 2f64.sqrt()];
        let r = [2.0 / n5, 1.0 / n5, 0.0];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        assert!((scores["p"] - (dot(&p, &p) - dot(&p, &r))).abs() < 1e-12);
        assert!((scores["q"] - (dot(&q, &p) - dot(&q, &r))).abs() < 1e-12);
        assert!((scores["r"] - (dot(&r, &p) - dot(&r, &r))).abs() < 1e-12);
        assert!(matches!(
            textonly_concreteness(&captions, &gold, 2, 0),
            Err(EvalError::TooFewWords { needed: 2, found: 2 })
        ));
    }

    #[test]
    fn buckets_must_ascend() {
        let t = CooccurrenceTable::new(2);
        assert!(concreteness_eval(&t, &BTreeMap::new(), &BTreeMap::new(), &[10, 1]).is_err());
    }
}
