//! Planar vectors and periodic wrapping on the square (-L, L)^2.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps a scalar coordinate into [-L, L).
pub fn wrap_coord(x: f64, half_length: f64) -> f64 {
    let period = 2.0 * half_length;
    let mut r = x - period * ((x + half_length) / period).floor();
    // Guard against rounding landing exactly on either edge.
    if r >= half_length {
        r -= period;
    }
    if r < -half_length {
        r += period;
    }
    r
}

/// Wraps a point into the fundamental domain [-L, L)^2.
pub fn wrap_point(p: Vec2, half_length: f64) -> Vec2 {
    Vec2::new(wrap_coord(p.x, half_length), wrap_coord(p.y, half_length))
}

/// Minimal-image difference a - b, each component in [-L, L).
pub fn minimal_image(a: Vec2, b: Vec2, half_length: f64) -> Vec2 {
    wrap_point(a - b, half_length)
}

/// Minimal-image distance between two points of the periodic square.
pub fn periodic_distance(a: Vec2, b: Vec2, half_length: f64) -> f64 {
    minimal_image(a, b, half_length).norm()
}
