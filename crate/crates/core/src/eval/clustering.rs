use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::{harmonic_mean, EvalError, Result};
use crate::text::CooccurrenceTable;

/// Hard word-to-cluster assignment.
pub type Clustering = BTreeMap<String, usize>;

/// Directed `(cue, response)` strengths. A missing pair is unknown, which is
/// not the same as strength 0.
pub type AssociationTable = BTreeMap<(String, String), u64>;

/// `w -> f(w)` for each of `words`. Words the encoder leaves unassigned get
/// a reserved singleton cluster each, numbered from `N` upward.
pub fn model_clustering<S: AsRef<str>>(table: &CooccurrenceTable, words: &[S], threshold: f64) -> Clustering {
    let mut next_reserved = table.n_clusters();
    let mut clustering = Clustering::new();
    for w in words {
        let w = w.as_ref();
        if clustering.contains_key(w) {
            continue;
        }
        let id = table.assign_word(w, threshold).cluster.unwrap_or_else(|| {
            next_reserved += 1;
            next_reserved - 1
        });
        clustering.insert(w.to_string(), id);
    }
    clustering
}

/// Size-weighted mean over gold classes of the best F-value any cluster
/// attains for that class. Only gold words count towards cluster sizes;
/// gold words missing from `clusters` are treated as singletons.
pub fn clustering_fscore(gold: &BTreeMap<String, String>, clusters: &Clustering) -> Result<f64> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    // Cluster keys: Some(id) for real clusters, None-tagged word for singletons.
    let mut members: BTreeMap<(Option<usize>, &str), BTreeSet<&str>> = BTreeMap::new();
    let mut classes: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (word, class) in gold {
        let key = match clusters.get(word) {
            Some(&id) => (Some(id), ""),
            None => (None, word.as_str()),
        };
        members.entry(key).or_default().insert(word);
        classes.entry(class).or_default().insert(word);
    }
    let total = gold.len() as f64;
    let mut score = 0.0;
    for class_words in classes.values() {
        let best = members
            .values()
            .map(|cluster| {
                let overlap = cluster.intersection(class_words).count() as f64;
                harmonic_mean(overlap / cluster.len() as f64, overlap / class_words.len() as f64)
            })
            .fold(0.0, f64::max);
        score += class_words.len() as f64 / total * best;
    }
    Ok(score)
}

/// Mean strength over ordered pairs `(x, y)`, `x != y`, of `words` that
/// share a cluster and appear in `assoc`. `None` if no pair qualifies.
pub fn mean_association_strength<S: AsRef<str>>(
    clusters: &Clustering,
    assoc: &AssociationTable,
    words: &[S],
) -> Option<f64> {
    let words: BTreeSet<&str> = words.iter().map(AsRef::as_ref).collect();
    let (mut sum, mut n) = (0u128, 0u64);
    for &x in &words {
        let Some(cx) = clusters.get(x) else { continue };
        for &y in &words {
            if x == y || clusters.get(y) != Some(cx) {
                continue;
            }
            if let Some(&s) = assoc.get(&(x.to_string(), y.to_string())) {
                sum += s as u128;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum as f64 / n as f64)
}

/// Each word, in the given order, drawn uniformly into one of `k` clusters.
pub fn random_clustering<S: AsRef<str>>(words: &[S], k: usize, seed: u64) -> Result<Clustering> {
    if k == 0 {
        return Err(EvalError::InvalidArgument("random clustering needs k >= 1".into()));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    Ok(words
        .iter()
        .map(|w| (w.as_ref().to_string(), rng.random_range(0..k)))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomBaseline {
    pub trials: usize,
    pub mean_fscore: f64,
    /// Mean over the trials in which MAS was defined.
    pub mean_mas: Option<f64>,
}

/// Average F-score and MAS of `trials` random clusterings of the gold words
/// into `k` clusters, seeded `seed`, `seed + 1`, ...
pub fn random_clustering_baseline(
    gold: &BTreeMap<String, String>,
    assoc: &AssociationTable,
    k: usize,
    seed: u64,
    trials: usize,
) -> Result<RandomBaseline> {
    if trials == 0 {
        return Err(EvalError::InvalidArgument("need at least one trial".into()));
    }
    let words: Vec<&String> = gold.keys().collect();
    let (mut f_sum, mut mas_sum, mut mas_n) = (0.0, 0.0, 0usize);
    for t in 0..trials {
        let clusters = random_clustering(&words, k, seed.wrapping_add(t as u64))?;
        f_sum += clustering_fscore(gold, &clusters)?;
        if let Some(m) = mean_association_strength(&clusters, assoc, &words) {
            mas_sum += m;
            mas_n += 1;
        }
    }
    Ok(RandomBaseline {
        trials,
        mean_fscore: f_sum / trials as f64,
        mean_mas: (mas_n > 0).then(|| mas_sum / mas_n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::BinaryClusterVector;

    fn map<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> BTreeMap<String, String> {
        pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect()
    }

    fn clusters<'a>(pairs: impl IntoIterator<Item = (&'a str, usize)>) -> Clustering {
        pairs.into_iter().map(|(a, b)| (a.into(), b)).collect()
    }

    #[test]
    fn fscore_examples() {
        let gold = map([("a", "A"), ("b", "A"), ("c", "B"), ("d", "B")]);
        let perfect = clusters([("a", 7), ("b", 7), ("c", 2), ("d", 2)]);
        assert_eq!(clustering_fscore(&gold, &perfect).unwrap(), 1.0);
        let c = clusters([("a", 1), ("b", 1), ("c", 1), ("d", 2)]);
        let expected = 0.5 * (2.0 * (2.0 / 3.0) / (2.0 / 3.0 + 1.0)) + 0.5 * (2.0 * 0.5 / 1.5);
        assert!((clustering_fscore(&gold, &c).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(clustering_fscore(&BTreeMap::new(), &c), Err(EvalError::EmptyGold)));
    }

    #[test]
    fn missing_words_are_singletons() {
        let gold = map([("a", "A"), ("b", "A")]);
        let none = Clustering::new();
        let explicit = clusters([("a", 0), ("b", 1)]);
        assert_eq!(clustering_fscore(&gold, &none).unwrap(), clustering_fscore(&gold, &explicit).unwrap());
    }

    #[test]
    fn mas_examples() {
        let assoc: AssociationTable = [(("a", "b"), 5), (("b", "a"), 1), (("c", "d"), 3)]
            .into_iter()
            .map(|((x, y), s)| ((x.to_string(), y.to_string()), s))
            .collect();
        let words = ["a", "b", "c", "d"];
        let c = clusters([("a", 0), ("b", 0), ("c", 1), ("d", 2)]);
        assert_eq!(mean_association_strength(&c, &assoc, &words), Some(3.0));
        let singletons = clusters([("a", 0), ("b", 1), ("c", 2), ("d", 3)]);
        assert_eq!(mean_association_strength(&singletons, &assoc, &words), None);
    }

    #[test]
    fn model_clustering_reserves_singletons() {
        let mut table = CooccurrenceTable::new(3);
        table
            .observe(&["x", "y"], &BinaryClusterVector::from_clusters(3, [1]))
            .unwrap();
        let c = model_clustering(&table, &["x", "y", "u", "v"], 0.5);
        assert_eq!(c["x"], 1);
        assert_eq!(c["y"], 1);
        assert_eq!((c["u"], c["v"]), (3, 4));
    }

    #[test]
    fn random_clustering_is_seeded() {
        assert_eq!(random_clustering(&["w"], 1, 9).unwrap()["w"], 0);
        let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        assert_eq!(random_clustering(&words, 4, 3).unwrap(), random_clustering(&words, 4, 3).unwrap());
        assert!(random_clustering(&words, 0, 3).is_err());
    }
}
