use std::collections::VecDeque;

use super::{BoundingBox, Network, Result, VisualError};
use crate::grad::{Real, Tensor};

/// Row-major scalar map.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "heatmap size");
        Self {
            width,
            height,
            values,
        }
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Bilinear resize with half-pixel centres (edges clamped).
    pub fn upsample_bilinear(&self, width: usize, height: usize) -> Heatmap {
        let axis = |dst: usize, src_len: usize, dst_len: usize| {
            let pos = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5)
                .clamp(0.0, (src_len - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src_len - 1);
            (lo, hi, pos - lo as f64)
        };
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let (y0, y1, wy) = axis(y, self.height, height);
            for x in 0..width {
                let (x0, x1, wx) = axis(x, self.width, width);
                let top = self.at(x0, y0) * (1.0 - wx) + self.at(x1, y0) * wx;
                let bottom = self.at(x0, y1) * (1.0 - wx) + self.at(x1, y1) * wx;
                values.push(top * (1.0 - wy) + bottom * wy);
            }
        }
        Heatmap::new(width, height, values)
    }
}

/// Class activation map of one cluster for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Cam {
    pub cluster: usize,
    /// At final feature-map resolution.
    pub heatmap: Heatmap,
    /// Resized to the input image resolution.
    pub upsampled: Heatmap,
}

/// `heatmap(x, y) = sum_k W[c, k] * F_k(x, y)` over the last feature maps.
/// `image` is `[1, 3, S, S]`.
pub fn compute_cam<T: Real>(image: &Tensor<T>, net: &Network<T>, cluster: usize) -> Result<Cam> {
    if cluster >= net.n_clusters() {
        return Err(VisualError::ClusterOutOfRange {
            cluster,
            n_clusters: net.n_clusters(),
        });
    }
    if image.shape().first() != Some(&1) {
        return Err(VisualError::Images(format!(
            "CAM expects a single image, got shape {:?}",
            image.shape()
        )));
    }
    let features = net.features(image)?;
    let [_, k, h, w] = match *features.shape() {
        [a, b, c, d] => [a, b, c, d],
        _ => unreachable!("features are rank 4"),
    };
    let weights = &net.head_weights().data()[cluster * k..(cluster + 1) * k];
    let mut values = vec![0.0f64; h * w];
    for (ch, plane) in features.data().chunks(h * w).enumerate() {
        let wk = weights[ch].as_f64();
        for (v, f) in values.iter_mut().zip(plane) {
            *v += wk * f.as_f64();
        }
    }
    let heatmap = Heatmap::new(w, h, values);
    let size = image.shape()[3];
    let upsampled = heatmap.upsample_bilinear(size, image.shape()[2]);
    Ok(Cam {
        cluster,
        heatmap,
        upsampled,
    })
}

/// Box around the largest 4-connected region of upsampled CAM pixels strictly
/// above half the maximum. Ties go to the region reached first in row-major
/// scan order. `None` marks a degenerate CAM: non-positive maximum, or a flat
/// map with no spatial variation.
pub fn extract_box(cam: &Cam) -> Option<BoundingBox> {
    let map = &cam.upsampled;
    let max = map.max();
    if !(max > 0.0) || max == map.min() {
        return None;
    }
    let threshold = 0.5 * max;
    let (w, h) = (map.width, map.height);
    let above: Vec<bool> = map.values.iter().map(|&v| v > threshold).collect();
    let mut seen = vec![false; w * h];
    let mut best: Option<(usize, BoundingBox)> = None;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !above[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut count, mut x0, mut y0, mut x1, mut y1) = (0usize, w, h, 0, 0);
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % w, idx / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            let mut visit = |nx: usize, ny: usize| {
                let n = ny * w + nx;
                if above[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < w {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < h {
                visit(x, y + 1);
            }
        }
        if best.as_ref().is_none_or(|(c, _)| count > *c) {
            let bbox = BoundingBox::new(x0 as u32, y0 as u32, x1 as u32 + 1, y1 as u32 + 1)
                .expect("component has at least one pixel");
            best = Some((count, bbox));
        }
    }
    best.map(|(_, b)| b)
}
