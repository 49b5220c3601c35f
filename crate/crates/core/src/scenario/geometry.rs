//! Unsafe-set geometry: balls, axis-aligned boxes, and the ground plane.

use serde::{Deserialize, Serialize};

/// Axis-aligned box given as `[min, max]` corner lists (2 or 3 coordinates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle(pub Vec<f64>, pub Vec<f64>);

impl Obstacle {
    pub fn min(&self) -> &[f64] {
        &self.0
    }

    pub fn max(&self) -> &[f64] {
        &self.1
    }

    pub fn dims(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance from `p` to the box; minus the depth to the nearest
    /// face when `p` is inside.
    pub fn signed_distance(&self, p: &[f64]) -> f64 {
        let mut outside = 0.0;
        let mut depth = f64::INFINITY;
        let mut inside = true;
        for d in 0..self.dims() {
            let gap = (self.0[d] - p[d]).max(p[d] - self.1[d]);
            if gap > 0.0 {
                inside = false;
                outside += gap * gap;
            } else {
                depth = depth.min(-gap);
            }
        }
        if inside {
            -depth
        } else {
            outside.sqrt()
        }
    }

    /// Smallest distance between the box and another box `[lo, hi]`; zero if they overlap.
    pub fn box_distance(&self, lo: &[f64], hi: &[f64]) -> f64 {
        box_gap(&self.0, &self.1, lo, hi)
    }
}

/// Smallest Euclidean distance between two boxes (0 when they touch or overlap).
pub fn box_gap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut sum = 0.0;
    for d in 0..alo.len() {
        let gap = (alo[d] - bhi[d]).max(blo[d] - ahi[d]).max(0.0);
        sum += gap * gap;
    }
    sum.sqrt()
}

/// Largest Euclidean distance between two boxes.
pub fn box_span(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> f64 {
    let mut sum = 0.0;
    for d in 0..alo.len() {
        let span = (ahi[d] - blo[d]).abs().max((bhi[d] - alo[d]).abs());
        sum += span * span;
    }
    sum.sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
