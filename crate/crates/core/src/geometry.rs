//! Axis-aligned boxes in trait space.

use serde::{Deserialize, Serialize};

/// Closed axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box corners must share a dimension");
        Self { lo, hi }
    }

    /// The 1D interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::new(vec![lo], vec![hi])
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k).max(0.0)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, &v)| v >= self.lo[k] && v <= self.hi[k])
    }

    /// Whether the closed boxes share at least one point.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    /// Smallest box containing both (the union of two boxes is replaced by its hull).
    pub fn hull(&self, other: &Aabb) -> Aabb {
        Aabb::new(
            self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        )
    }

    /// Minkowski sum with the closed ball of the given radius, bounded by its enclosing box.
    pub fn dilate(&self, radius: f64) -> Aabb {
        Aabb::new(
            self.lo.iter().map(|v| v - radius).collect(),
            self.hi.iter().map(|v| v + radius).collect(),
        )
    }

    /// Euclidean distance from `x` to the box (zero inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let d = (self.lo[k] - v).max(v - self.hi[k]).max(0.0);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// The 2^d corners in lexicographic order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| if mask >> k & 1 == 0 { self.lo[k] } else { self.hi[k] })
                    .collect()
            })
            .collect()
    }
}
