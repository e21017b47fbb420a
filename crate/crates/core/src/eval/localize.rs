use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::classify::{predict_images, LabeledImage, Prf};
use super::{EvalError, Result};
use crate::visual::{compute_cam, extract_box, BoundingBox, Network};

/// Intersection over union by pixel area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching by descending IoU over pairs with IoU strictly
/// above 0.5. Equal IoUs are taken in (predicted, gold) index order.
/// Returns `(predicted index, gold index, iou)` triples.
pub fn match_boxes(predicted: &[BoundingBox], gold: &[BoundingBox]) -> Vec<(usize, usize, f64)> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, g) in gold.iter().enumerate() {
            let v = iou(p, g);
            if v > 0.5 {
                pairs.push((i, j, v));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_g = vec![false; gold.len()];
    let mut matches = Vec::new();
    for (i, j, v) in pairs {
        if !used_p[i] && !used_g[j] {
            used_p[i] = true;
            used_g[j] = true;
            matches.push((i, j, v));
        }
    }
    matches
}

fn score(predicted: &[BoundingBox], gold: &[BoundingBox]) -> Prf {
    let tp = match_boxes(predicted, gold).len() as u64;
    Prf {
        true_positives: tp,
        false_positives: predicted.len() as u64 - tp,
        false_negatives: gold.len() as u64 - tp,
    }
}

/// One box per predicted cluster whose CAM is not degenerate.
pub fn predicted_boxes(image: &LabeledImage, net: &Network<f32>, clusters: impl IntoIterator<Item = usize>) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for c in clusters {
        if let Some(b) = extract_box(&compute_cam(&image.image, net, c)?) {
            boxes.push(b);
        }
    }
    Ok(boxes)
}

/// Class-agnostic localization: CAM boxes of the predicted clusters against
/// the gold boxes, micro-aggregated over images.
pub fn localization_eval(images: &[LabeledImage], net: &Network<f32>, threshold: f64) -> Result<Prf> {
    let predictions = predict_images(images, net, threshold)?;
    let mut total = Prf::default();
    for (image, clusters) in images.iter().zip(&predictions) {
        let boxes = predicted_boxes(image, net, clusters.clusters())?;
        let gold: Vec<BoundingBox> = image.boxes.iter().map(|(_, b)| *b).collect();
        total.add(score(&boxes, &gold));
    }
    Ok(total)
}

/// `k` boxes with uniformly drawn corners inside a `width x height` image.
/// Coordinates are ordered per axis; draws with zero area are repeated.
pub fn random_boxes(k: usize, width: u32, height: u32, seed: u64) -> Result<Vec<BoundingBox>> {
    if k == 0 || width == 0 || height == 0 {
        return Err(EvalError::InvalidArgument(format!(
            "random boxes need k >= 1 and a non-empty image, got k = {k}, {width}x{height}"
        )));
    }
    let mut rng = Pcg64::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| loop {
            let (x0, x1) = (rng.random_range(0..=width), rng.random_range(0..=width));
            let (y0, y1) = (rng.random_range(0..=height), rng.random_range(0..=height));
            if let Some(b) = BoundingBox::new(x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)) {
                break b;
            }
        })
        .collect())
}

/// Random-box baseline: each image gets as many random boxes as it has gold
/// boxes, drawn with seed `seed + image index`.
pub fn random_box_baseline(images: &[LabeledImage], seed: u64) -> Result<Prf> {
    let mut total = Prf::default();
    for (i, image) in images.iter().enumerate() {
        let gold: Vec<BoundingBox> = image.boxes.iter().map(|(_, b)| *b).collect();
        if gold.is_empty() {
            continue;
        }
        let shape = image.image.shape();
        let boxes = random_boxes(gold.len(), shape[3] as u32, shape[2] as u32, seed.wrapping_add(i as u64))?;
        total.add(score(&boxes, &gold));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: u32, y0: u32, x1: u32, y1: u32) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = b(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(10, 0, 20, 10)), 0.0);
        assert_eq!(iou(&a, &b(0, 5, 10, 15)), 50.0 / 150.0);
    }

    #[test]
    fn greedy_single_use() {
        let gold = [b(0, 0, 20, 10)];
        let p1 = b(0, 0, 12, 10);
        let p2 = b(0, 0, 11, 10);
        assert_eq!(iou(&p1, &gold[0]), 0.6);
        assert_eq!(iou(&p2, &gold[0]), 0.55);
        let m = match_boxes(&[p2, p1], &gold);
        assert_eq!(m, vec![(1, 0, 0.6)]);
        let prf = score(&[p2, p1], &gold);
        assert_eq!((prf.true_positives, prf.false_positives, prf.false_negatives), (1, 1, 0));
    }

    #[test]
    fn half_overlap_is_not_a_match() {
        // IoU exactly 0.5.
        let m = match_boxes(&[b(0, 0, 10, 10)], &[b(0, 0, 10, 5)]);
        assert!(m.is_empty());
    }

    #[test]
    fn random_boxes_are_valid_and_seeded() {
        let boxes = random_boxes(500, 64, 64, 3).unwrap();
        assert!(boxes.iter().all(|x| x.area() > 0 && x.fits_within(64, 64)));
        assert_eq!(boxes, random_boxes(500, 64, 64, 3).unwrap());
        assert!(random_boxes(0, 64, 64, 3).is_err());
        assert_eq!(random_boxes(1, 1, 1, 0).unwrap()[0], b(0, 0, 1, 1));
    }
}
