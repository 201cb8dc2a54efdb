//! Small fixed-size geometry types.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::Real;

/// A point or displacement in the simulation plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sqr(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Linear interpolation `self + s (other - self)`.
    #[inline]
    pub fn lerp(self, other: Self, s: T) -> Self {
        self + (other - self) * s
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> AddAssign for Vec2<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

impl<T: Real> Rect<T> {
    pub fn new(min: Vec2<T>, max: Vec2<T>) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vec2<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Clips the segment `p0 → p1` against the rectangle (Liang–Barsky) and
    /// returns the parameter interval `[s0, s1] ⊂ [0, 1]` that lies inside.
    pub fn clip_segment(&self, p0: Vec2<T>, p1: Vec2<T>) -> Option<(T, T)> {
        let d = p1 - p0;
        let mut s0 = T::zero();
        let mut s1 = T::one();
        let checks = [
            (-d.x, p0.x - self.min.x),
            (d.x, self.max.x - p0.x),
            (-d.y, p0.y - self.min.y),
            (d.y, self.max.y - p0.y),
        ];
        for (p, q) in checks {
            if p == T::zero() {
                if q < T::zero() {
                    return None;
                }
            } else {
                let r = q / p;
                if p < T::zero() {
                    if r > s1 {
                        return None;
                    }
                    if r > s0 {
                        s0 = r;
                    }
                } else {
                    if r < s0 {
                        return None;
                    }
                    if r < s1 {
                        s1 = r;
                    }
                }
            }
        }
        (s1 > s0).then_some((s0, s1))
    }
}

/// Space-time event `(t, x, y, z)`; `c = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Event<T> {
    pub t: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Event<T> {
    pub fn new(t: T, x: T, y: T, z: T) -> Self {
        Self { t, x, y, z }
    }

    pub fn spatial_distance(&self, o: &Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        let dz = self.z - o.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn plane_point(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_segment_half_inside() {
        let r = Rect::new(Vec2::new(0.0, -1.0), Vec2::new(1.0, 1.0));
        let (s0, s1) = r
            .clip_segment(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0))
            .unwrap();
        assert_eq!((s0, s1), (0.5, 1.0));
        assert!(r
            .clip_segment(Vec2::new(-1.0, 2.0), Vec2::new(1.0, 2.0))
            .is_none());
    }
}
