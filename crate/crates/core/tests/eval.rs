use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use xmc_core::eval::{
    build_class_map, clustering_fscore, concreteness_eval, cooccurrence_embeddings, iou, kmeans, match_boxes,
    mean_association_strength, micro_prf, pearson, predict_classes, random_boxes, random_clustering,
    textonly_concreteness, textonly_kmeans_clustering, AssociationTable, Clustering, KMEANS_MAX_ITER,
};
use xmc_core::text::CooccurrenceTable;
use xmc_core::visual::BoundingBox;
use xmc_core::BinaryClusterVector;

fn map<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn clustering<const N: usize>(pairs: [(&str, usize); N]) -> Clustering {
    pairs.iter().map(|(w, c)| (w.to_string(), *c)).collect()
}

fn bx(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

fn set(words: &[&str]) -> BTreeSet<String> {
    words.iter().map(|w| w.to_string()).collect()
}

#[test]
fn fscore_examples() {
    let gold = map([("a", "A"), ("b", "A"), ("c", "B"), ("d", "B")]);
    let f = clustering_fscore(&gold, &clustering([("a", 1), ("b", 1), ("c", 1), ("d", 2)])).unwrap();
    assert!((f - (0.5 * 0.8 + 0.5 * (2.0 / 3.0))).abs() < 1e-12);
    assert!((f - 0.7333).abs() < 1e-4);
    let exact = clustering_fscore(&gold, &clustering([("a", 7), ("b", 7), ("c", 3), ("d", 3)])).unwrap();
    assert_eq!(exact, 1.0);
    assert!(clustering_fscore(&BTreeMap::new(), &Clustering::new()).is_err());
}

#[test]
fn mas_examples() {
    let assoc: AssociationTable = [(("a", "b"), 5), (("b", "a"), 1), (("c", "d"), 3)]
        .iter()
        .map(|((x, y), s)| ((x.to_string(), y.to_string()), *s))
        .collect();
    let words = ["a", "b", "c", "d"];
    let grouped = clustering([("a", 0), ("b", 0), ("c", 1), ("d", 2)]);
    assert_eq!(mean_association_strength(&grouped, &assoc, &words), Some(3.0));
    let singletons = clustering([("a", 0), ("b", 1), ("c", 2), ("d", 3)]);
    assert_eq!(mean_association_strength(&singletons, &assoc, &words), None);
}

#[test]
fn pearson_examples() {
    let xs = [1.0, 2.0, 3.0];
    assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&xs, &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
    assert!((pearson(&xs, &[1.0, 2.0, 4.0]).unwrap() - 0.98198).abs() < 1e-5);
    assert!(pearson(&xs, &[2.0, 2.0, 2.0]).is_err());
    assert!(pearson(&[1.0], &[1.0]).is_err());
}

#[test]
fn iou_examples() {
    let a = bx(0, 0, 10, 10);
    assert_eq!(iou(&a, &a), 1.0);
    assert_eq!(iou(&a, &bx(10, 0, 20, 10)), 0.0);
    assert_eq!(iou(&a, &bx(0, 5, 10, 15)), 1.0 / 3.0);
}

#[test]
fn matching_is_greedy_and_single_use() {
    let gold = [bx(0, 0, 20, 10)];
    // IoU 0.6 and 0.55 against the same gold box.
    let predicted = [bx(0, 0, 12, 10), bx(0, 0, 11, 10)];
    assert!((iou(&predicted[0], &gold[0]) - 0.6).abs() < 1e-12);
    assert!((iou(&predicted[1], &gold[0]) - 0.55).abs() < 1e-12);
    let m = match_boxes(&predicted, &gold);
    assert_eq!(m.len(), 1);
    assert_eq!((m[0].0, m[0].1), (0, 0));
    // IoU of exactly one half is not a match.
    assert!(match_boxes(&[bx(0, 0, 10, 10)], &[bx(0, 0, 20, 10)]).is_empty());
    assert!(match_boxes(&[], &gold).is_empty());
}

#[test]
fn multilabel_counts_examples() {
    let gold = [set(&["cat", "dog"]), set(&["car"])];
    let predicted = [set(&["cat", "tree"]), set(&[])];
    let prf = micro_prf(predicted.iter().zip(&gold));
    assert_eq!((prf.true_positives, prf.false_positives, prf.false_negatives), (1, 1, 2));
    assert_eq!(prf.precision(), 0.5);
    assert!((prf.recall() - 1.0 / 3.0).abs() < 1e-15);
    let perfect = micro_prf(gold.iter().zip(&gold));
    assert_eq!((perfect.precision(), perfect.recall(), perfect.f1()), (1.0, 1.0, 1.0));
    let empty = [set(&[]), set(&[])];
    let none = micro_prf(empty.iter().zip(&gold));
    assert_eq!((none.precision(), none.recall(), none.f1()), (0.0, 0.0, 0.0));
}

#[test]
fn class_map_examples() {
    let mut t = CooccurrenceTable::new(4);
    assert!(build_class_map(&["cat"], &t, 0.08).is_empty());
    t.observe(&["cat", "dog"], &BinaryClusterVector::from_clusters(4, [2])).unwrap();
    t.observe(&["car"], &BinaryClusterVector::from_clusters(4, [0])).unwrap();
    let m = build_class_map(&["cat", "dog", "car", "unseen"], &t, 0.08);
    assert_eq!(m.get(&2), Some(&set(&["cat", "dog"])));
    assert_eq!(m.get(&0), Some(&set(&["car"])));
    assert_eq!(m.len(), 2);
    let predicted = predict_classes(&BinaryClusterVector::from_clusters(4, [0, 2, 3]), &m);
    assert_eq!(predicted, set(&["car", "cat", "dog"]));
}

#[test]
fn concreteness_eval_examples() {
    let mut t = CooccurrenceTable::new(4);
    t.observe(&["ball", "the"], &BinaryClusterVector::from_clusters(4, [0])).unwrap();
    t.observe(&["sand", "the"], &BinaryClusterVector::from_clusters(4, [1])).unwrap();
    t.observe(&["sand", "the"], &BinaryClusterVector::from_clusters(4, [1])).unwrap();
    t.observe(&["the"], &BinaryClusterVector::from_clusters(4, [2])).unwrap();
    t.observe(&["the"], &BinaryClusterVector::from_clusters(4, [3])).unwrap();
    let words = ["ball", "sand", "the"];
    let gold: BTreeMap<String, f64> = words.iter().map(|w| (w.to_string(), t.concreteness(w))).collect();
    let freq: BTreeMap<String, u64> = [("ball", 1), ("sand", 12), ("the", 60)]
        .iter()
        .map(|(w, n)| (w.to_string(), *n))
        .collect();
    let buckets = concreteness_eval(&t, &gold, &freq, &[1, 10, 50]).unwrap();
    assert_eq!(buckets.iter().map(|b| b.words).collect::<Vec<_>>(), [3, 2, 1]);
    assert!((buckets[0].pearson.unwrap() - 1.0).abs() < 1e-12);
    assert!((buckets[1].pearson.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(buckets[2].pearson, None);
    assert!(concreteness_eval(&t, &gold, &freq, &[10, 1]).is_err());
}

fn captions(lines: &[&str]) -> Vec<Vec<String>> {
    lines
        .iter()
        .map(|l| l.split_whitespace().map(String::from).collect())
        .collect()
}

#[test]
fn embeddings_match_hand_cosines() {
    // Pair counts: (x,y)=2, (x,z)=1, (y,z)=1.
    let corpus = captions(&["x y", "x y z", "z"]);
    let (vocab, rows) = cooccurrence_embeddings(&corpus);
    assert_eq!(vocab, ["x", "y", "z"]);
    let dense = |r: &[(usize, f64)]| {
        let mut v = [0.0; 3];
        for &(j, x) in r {
            v[j] = x;
        }
        v
    };
    let s5 = 5f64.sqrt();
    let x = dense(&rows[0]);
    let z = dense(&rows[2]);
    assert!((x[1] - 2.0 / s5).abs() < 1e-15 && (x[2] - 1.0 / s5).abs() < 1e-15 && x[0] == 0.0);
    assert!((z[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    let cos_xz: f64 = x.iter().zip(&z).map(|(a, b)| a * b).sum();
    assert!((cos_xz - 2.0 / (s5 * 2f64.sqrt())).abs() < 1e-15);
}

#[test]
fn textonly_scores_follow_the_representatives() {
    // "twin" shares every context of "stone"; "echo" every context of "of".
    let mut lines = Vec::new();
    for _ in 0..12 {
        lines.extend(["stone hill", "twin hill", "of very", "echo very"]);
    }
    let corpus = captions(&lines);
    let gold: BTreeMap<String, f64> = [("stone", 1.0), ("of", 0.0)].iter().map(|(w, r)| (w.to_string(), *r)).collect();
    let scores = textonly_concreteness(&corpus, &gold, 1, 10).unwrap();
    assert!(scores["twin"] > scores["echo"]);
    let doubled: Vec<Vec<String>> = corpus.iter().chain(&corpus).cloned().collect();
    let again = textonly_concreteness(&doubled, &gold, 1, 10).unwrap();
    for (w, s) in &scores {
        assert!((again[w] - s).abs() < 1e-12, "{w}");
    }
    assert!(textonly_concreteness(&corpus, &gold, 2, 10).is_err());
}

#[test]
fn kmeans_examples() {
    let points: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![5.0, 1.0], vec![2.0, 9.0]];
    let r = kmeans(&points, 3, 1, KMEANS_MAX_ITER).unwrap();
    assert_eq!(r.inertia(), 0.0);
    assert_eq!(r.assignments.iter().collect::<BTreeSet<_>>().len(), 3);

    let mut blobs = Vec::new();
    for i in 0..20 {
        let d = (i as f64 * 0.37).sin() * 0.3;
        blobs.push(vec![d, -d]);
        blobs.push(vec![10.0 + d, 10.0 + d]);
    }
    let r = kmeans(&blobs, 2, 4, KMEANS_MAX_ITER).unwrap();
    for pair in r.assignments.chunks(2) {
        assert_ne!(pair[0], pair[1]);
    }
    assert!(r.assignments.iter().step_by(2).all(|&a| a == r.assignments[0]));
    assert!(kmeans(&blobs, 41, 0, KMEANS_MAX_ITER).is_err());
}

#[test]
fn textonly_kmeans_separates_disjoint_contexts() {
    let mut lines = Vec::new();
    for _ in 0..5 {
        lines.extend(["red sun beach", "blue sun beach", "green snow hill", "pink snow hill"]);
    }
    let corpus = captions(&lines);
    let words = ["red", "blue", "green", "pink"];
    let c = textonly_kmeans_clustering(&corpus, &words, 2, 3).unwrap();
    assert_eq!(c["red"], c["blue"]);
    assert_eq!(c["green"], c["pink"]);
    assert_ne!(c["red"], c["green"]);
}

/// Critical value of the chi-squared distribution with 9 degrees of freedom
/// at the 1% level.
const CHI2_9DF_1PCT: f64 = 21.666;

#[test]
fn random_clustering_is_uniform() {
    let words: Vec<String> = (0..10_000).map(|i| format!("w{i}")).collect();
    let c = random_clustering(&words, 10, 77).unwrap();
    let mut counts = [0f64; 10];
    for &id in c.values() {
        counts[id] += 1.0;
    }
    let expected = 1000.0;
    let chi2: f64 = counts.iter().map(|o| (o - expected).powi(2) / expected).sum();
    assert!(chi2 < CHI2_9DF_1PCT, "chi2 = {chi2}, counts {counts:?}");
    assert_eq!(random_clustering(&["only"], 1, 5).unwrap()["only"], 0);
    assert_eq!(c, random_clustering(&words, 10, 77).unwrap());
}

#[test]
fn random_boxes_are_valid_and_seeded() {
    let boxes = random_boxes(500, 64, 48, 3).unwrap();
    assert!(boxes.iter().all(|b| b.fits_within(64, 48) && b.area() > 0));
    assert_eq!(boxes, random_boxes(500, 64, 48, 3).unwrap());
    assert!(random_boxes(0, 64, 64, 1).is_err());
}

fn small_clustering() -> impl Strategy<Value = (BTreeMap<String, String>, Clustering)> {
    prop::collection::vec((0usize..3, 0usize..4), 1..7).prop_map(|v| {
        let gold = v
            .iter()
            .enumerate()
            .map(|(i, (g, _))| (format!("w{i}"), format!("G{g}")))
            .collect();
        let clusters = v.iter().enumerate().map(|(i, (_, c))| (format!("w{i}"), *c)).collect();
        (gold, clusters)
    })
}

fn arb_box() -> impl Strategy<Value = BoundingBox> {
    (0u32..20, 0u32..20, 1u32..15, 1u32..15).prop_map(|(x, y, w, h)| bx(x, y, x + w, y + h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fscore_and_mas_ignore_cluster_ids(
        (gold, clusters) in small_clustering(),
        perm in Just([3usize, 0, 2, 1]).prop_shuffle(),
        strengths in prop::collection::vec(0u64..10, 36),
    ) {
        let relabeled: Clustering = clusters.iter().map(|(w, &c)| (w.clone(), perm[c] + 100)).collect();
        let words: Vec<&String> = gold.keys().collect();
        let assoc: AssociationTable = words
            .iter()
            .flat_map(|a| words.iter().map(move |b| ((*a).clone(), (*b).clone())))
            .zip(&strengths)
            .filter(|(_, &s)| s % 3 != 0)
            .map(|(k, &s)| (k, s))
            .collect();
        let f = clustering_fscore(&gold, &clusters).unwrap();
        prop_assert_eq!(f, clustering_fscore(&gold, &relabeled).unwrap());
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert_eq!(
            mean_association_strength(&clusters, &assoc, &words),
            mean_association_strength(&relabeled, &assoc, &words)
        );
    }

    #[test]
    fn pearson_ignores_positive_affine_maps(
        xs in prop::collection::vec(-10.0f64..10.0, 3..12),
        noise in prop::collection::vec(-5.0f64..5.0, 12),
        a in 0.1f64..10.0, b in -10.0f64..10.0,
    ) {
        let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, n)| x + n).collect();
        if let Ok(r) = pearson(&xs, &ys) {
            let scaled: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            prop_assert!((pearson(&scaled, &ys).unwrap() - r).abs() < 1e-9);
            let shifted: Vec<f64> = ys.iter().map(|y| a * y - b).collect();
            prop_assert!((pearson(&xs, &shifted).unwrap() - r).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
        let v = iou(&a, &b);
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn matches_are_one_to_one_and_above_half(
        predicted in prop::collection::vec(arb_box(), 0..5),
        gold in prop::collection::vec(arb_box(), 0..5),
    ) {
        let m = match_boxes(&predicted, &gold);
        let ps: BTreeSet<usize> = m.iter().map(|t| t.0).collect();
        let gs: BTreeSet<usize> = m.iter().map(|t| t.1).collect();
        prop_assert_eq!(ps.len(), m.len());
        prop_assert_eq!(gs.len(), m.len());
        prop_assert!(m.iter().all(|t| t.2 > 0.5));
    }

    #[test]
    fn kmeans_inertia_never_increases(seed in any::<u64>(), n in 2usize..30, k in 1usize..5) {
        let k = k.min(n);
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![((i as u64 ^ seed) % 97) as f64, ((i as u64).wrapping_mul(seed) % 89) as f64])
            .collect();
        let r = kmeans(&pts, k, seed, KMEANS_MAX_ITER).unwrap();
        for w in r.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        prop_assert!(r.assignments.iter().all(|&a| a < k));
    }

    #[test]
    fn raising_min_freq_never_adds_words(freqs in prop::collection::vec(0u64..100, 1..10), cut in prop::collection::vec(0u64..120, 1..5)) {
        let mut cut = cut;
        cut.sort_unstable();
        let t = CooccurrenceTable::new(2);
        let gold: BTreeMap<String, f64> = (0..freqs.len()).map(|i| (format!("w{i}"), i as f64)).collect();
        let freq: BTreeMap<String, u64> = freqs.iter().enumerate().map(|(i, &f)| (format!("w{i}"), f)).collect();
        let buckets = concreteness_eval(&t, &gold, &freq, &cut).unwrap();
        for w in buckets.windows(2) {
            prop_assert!(w[1].words <= w[0].words);
        }
    }
}
