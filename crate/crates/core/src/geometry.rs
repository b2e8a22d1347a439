//! Planar geometry primitives shared by the simulator and the lane oracle.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A 2D point or vector in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(rad: f64) -> Self {
        Self::new(rad.cos(), rad.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn rotate(self, rad: f64) -> Self {
        let (s, c) = rad.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Reflection across the x axis.
    pub fn mirror_y(self) -> Self {
        Self::new(self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
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

/// Wraps an angle into (−π, π].
pub fn normalize_angle(rad: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = rad.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

/// A closed line segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Parameter of the orthogonal projection of `p` onto the supporting line
    /// (0 at `a`, 1 at `b`), not clamped.
    pub fn project_param(&self, p: Vec2) -> f64 {
        let d = self.b - self.a;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return 0.0;
        }
        (p - self.a).dot(d) / len2
    }

    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let t = self.project_param(p).clamp(0.0, 1.0);
        self.a + (self.b - self.a) * t
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        self.closest_point(p).distance(p)
    }

    /// Distance along the ray `origin + t·dir` (unit `dir`) to this segment.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom.abs() < 1e-12 {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if t >= 0.0 && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }

    /// True when the two closed segments share at least one point.
    pub fn intersects(&self, o: &Segment) -> bool {
        let d1 = (o.b - o.a).cross(self.a - o.a);
        let d2 = (o.b - o.a).cross(self.b - o.a);
        let d3 = (self.b - self.a).cross(o.a - self.a);
        let d4 = (self.b - self.a).cross(o.b - self.a);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        let on = |s: &Segment, p: Vec2, d: f64| d == 0.0 && s.distance_to(p) == 0.0;
        on(o, self.a, d1) || on(o, self.b, d2) || on(self, o.a, d3) || on(self, o.b, d4)
    }

    pub fn mirror_y(&self) -> Self {
        Self::new(self.a.mirror_y(), self.b.mirror_y())
    }
}

/// An oriented rectangle: `half_extents` are measured along the rectangle's
/// own x/y axes, which are rotated by `angle` (radians) from the world axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: Vec2,
    pub half_extents: Vec2,
    #[serde(default)]
    pub angle: f64,
}

impl Rect {
    pub fn new(center: Vec2, half_extents: Vec2, angle: f64) -> Self {
        Self { center, half_extents, angle }
    }

    /// Axis-aligned rectangle spanning `[x0, x1] × [y0, y1]` (corners in any order).
    pub fn from_bounds(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (lx, hx) = (x0.min(x1), x0.max(x1));
        let (ly, hy) = (y0.min(y1), y0.max(y1));
        Self::new(
            Vec2::new((lx + hx) / 2.0, (ly + hy) / 2.0),
            Vec2::new((hx - lx) / 2.0, (hy - ly) / 2.0),
            0.0,
        )
    }

    fn to_local(&self, p: Vec2) -> Vec2 {
        (p - self.center).rotate(-self.angle)
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    /// Euclidean distance from `p` to the filled rectangle (0 inside).
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_extents.x).max(0.0);
        let dy = (l.y.abs() - self.half_extents.y).max(0.0);
        dx.hypot(dy)
    }

    pub fn corners(&self) -> [Vec2; 4] {
        let h = self.half_extents;
        [
            Vec2::new(-h.x, -h.y),
            Vec2::new(h.x, -h.y),
            Vec2::new(h.x, h.y),
            Vec2::new(-h.x, h.y),
        ]
        .map(|c| self.center + c.rotate(self.angle))
    }

    pub fn edges(&self) -> [Segment; 4] {
        let c = self.corners();
        [
            Segment::new(c[0], c[1]),
            Segment::new(c[1], c[2]),
            Segment::new(c[2], c[3]),
            Segment::new(c[3], c[0]),
        ]
    }

    pub fn mirror_y(&self) -> Self {
        Self::new(self.center.mirror_y(), self.half_extents, -self.angle)
    }
}
