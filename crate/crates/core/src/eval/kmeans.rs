use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::concreteness::cooccurrence_embeddings;
use super::{Clustering, EvalError, Result};

pub const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances after each assignment pass.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's algorithm with k-means++ seeding. Stops when an assignment pass
/// changes nothing or after `max_iter` passes. A cluster left empty is
/// reseeded with the point farthest from its own centroid.
pub fn kmeans(vectors: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    let n = vectors.len();
    if k == 0 || k > n {
        return Err(EvalError::InvalidArgument(format!("k = {k} with {n} vectors")));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(EvalError::InvalidArgument("vectors differ in dimension".into()));
    }
    let mut rng = Pcg64::seed_from_u64(seed);

    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = vectors.iter().map(|v| dist2(v, &vectors[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            while d2[pick] == 0.0 {
                pick -= 1;
            }
            pick
        } else {
            // Every point coincides with a centre: take the first unused one.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, v) in vectors.iter().enumerate() {
            d2[i] = d2[i].min(dist2(v, &vectors[next]));
        }
    }
    let mut centroids: Vec<Vec<f64>> = chosen.iter().map(|&i| vectors[i].clone()).collect();

    let mut assignments = vec![usize::MAX; n];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, v) in vectors.iter().enumerate() {
            let (c, d) = nearest(v, &centroids);
            inertia += d;
            if assignments[i] != c {
                assignments[i] = c;
                changed = true;
            }
        }
        if !changed {
            inertia_history.push(inertia);
            break;
        }

        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        while let Some(empty) = sizes.iter().position(|&s| s == 0) {
            let (far, _) = vectors
                .iter()
                .enumerate()
                .filter(|(i, _)| sizes[assignments[*i]] > 1)
                .map(|(i, v)| (i, dist2(v, &centroids[assignments[i]])))
                .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            sizes[assignments[far]] -= 1;
            assignments[far] = empty;
            sizes[empty] = 1;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        for (v, &a) in vectors.iter().zip(&assignments) {
            for (s, x) in sums[a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for ((centroid, sum), &size) in centroids.iter_mut().zip(sums).zip(&sizes) {
            *centroid = sum.into_iter().map(|s| s / size as f64).collect();
        }
        inertia_history.push(
            vectors
                .iter()
                .zip(&assignments)
                .map(|(v, &a)| dist2(v, &centroids[a]))
                .sum(),
        );
    }
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia_history,
    })
}

/// Text-only baseline: k-means over the co-occurrence embeddings of `words`.
/// Words absent from the corpus get the zero vector.
pub fn textonly_kmeans_clustering<S: AsRef<str>>(
    captions: &[Vec<String>],
    words: &[S],
    k: usize,
    seed: u64,
) -> Result<Clustering> {
    let (vocab, rows) = cooccurrence_embeddings(captions);
    let index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let vectors: Vec<Vec<f64>> = words
        .iter()
        .map(|w| {
            let mut v = vec![0.0; vocab.len()];
            if let Some(&i) = index.get(w.as_ref()) {
                for &(j, x) in &rows[i] {
                    v[j] = x;
                }
            }
            v
        })
        .collect();
    let result = kmeans(&vectors, k, seed, KMEANS_MAX_ITER)?;
    Ok(words
        .iter()
        .zip(result.assignments)
        .map(|(w, c)| (w.as_ref().to_string(), c))
        .collect())
}
