//! Planar vectors and axis-aligned boxes.
//!
//! All collision geometry in this crate reduces to axis-aligned boxes; boxes
//! use closed intervals, so touching counts as overlap (the conservative
//! choice for keep-out checks).

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// Planar point or displacement, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Scale down to `max` length if longer; zero vectors pass through.
    pub fn clamp_norm(self, max: f64) -> Vec2 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2 { x: a[0], y: a[1] }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned box with closed intervals `[min.x, max.x] x [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec2,
    pub max: Vec2,
}

impl Aabb {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        assert!(min.x <= max.x && min.y <= max.y, "inverted box");
        Aabb { min, max }
    }

    pub fn from_center(center: Vec2, half_x: f64, half_y: f64) -> Self {
        assert!(half_x >= 0.0 && half_y >= 0.0, "negative half-width");
        Aabb {
            min: Vec2::new(center.x - half_x, center.y - half_y),
            max: Vec2::new(center.x + half_x, center.y + half_y),
        }
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.min.x + self.max.x),
            0.5 * (self.min.y + self.max.y),
        )
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Closed-interval overlap: boxes that merely touch intersect.
    pub fn intersects(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x
            && o.min.x <= self.max.x
            && self.min.y <= o.max.y
            && o.min.y <= self.max.y
    }

    /// Smallest box containing both.
    pub fn hull(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    /// Grow by `m` on every side.
    pub fn inflate(&self, m: f64) -> Aabb {
        Aabb::new(
            Vec2::new(self.min.x - m, self.min.y - m),
            Vec2::new(self.max.x + m, self.max.y + m),
        )
    }

    /// Euclidean separation distance; 0 for intersecting or touching boxes.
    pub fn gap(&self, o: &Aabb) -> f64 {
        let dx = (self.min.x - o.max.x).max(o.min.x - self.max.x).max(0.0);
        let dy = (self.min.y - o.max.y).max(o.min.y - self.max.y).max(0.0);
        dx.hypot(dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_intersection_is_closed() {
        let a = Aabb::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        let touching = Aabb::new(Vec2::new(1.0, 0.0), Vec2::new(2.0, 1.0));
        let apart = Aabb::new(Vec2::new(1.1, 0.0), Vec2::new(2.0, 1.0));
        assert!(a.intersects(&touching));
        assert!(!a.intersects(&apart));
        assert_eq!(a.gap(&touching), 0.0);
        assert!((a.gap(&apart) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn hull_covers_both() {
        let a = Aabb::from_center(Vec2::ZERO, 0.5, 0.5);
        let b = Aabb::from_center(Vec2::new(1.5, 0.0), 0.5, 0.5);
        let h = a.hull(&b);
        assert_eq!(h.min, Vec2::new(-0.5, -0.5));
        assert_eq!(h.max, Vec2::new(2.0, 0.5));
    }

    #[test]
    fn clamp_norm_preserves_direction() {
        let v = Vec2::new(3.0, 4.0).clamp_norm(1.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert!((v.x / v.y - 0.75).abs() < 1e-12);
        assert_eq!(Vec2::ZERO.clamp_norm(1.0), Vec2::ZERO);
    }
}
