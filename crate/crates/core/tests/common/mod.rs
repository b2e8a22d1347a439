//! Reference implementations used by the integration tests. They share no
//! code with the library beyond its public types.

#![allow(dead_code)]

use navfuse::depth::DepthFrame;
use navfuse::geometry::{Rect, Vec2};
use navfuse::sim::World;

/// Straight quadruple loop with explicit bounds checks instead of a padded
/// buffer; same accumulation order as a row-major kernel sweep.
pub fn naive_smooth(frame: &DepthFrame, k: &[[f32; 5]; 5]) -> [[f32; 8]; 8] {
    let mut out = [[0f32; 8]; 8];
    for r in 0..8i32 {
        for c in 0..8i32 {
            let mut acc = 0f32;
            for i in 0..5i32 {
                for j in 0..5i32 {
                    let (rr, cc) = (r + i - 2, c + j - 2);
                    let v = if (0..8).contains(&rr) && (0..8).contains(&cc) {
                        let (rr, cc) = (rr as usize, cc as usize);
                        if frame.validity_mask() >> (rr * 8 + cc) & 1 == 1 {
                            f32::from(frame.cells()[rr][cc])
                        } else {
                            4000.0
                        }
                    } else {
                        0.0
                    };
                    acc += k[i as usize][j as usize] * v;
                }
            }
            out[r as usize][c as usize] = acc;
        }
    }
    out
}

/// Unnormalized Gaussian samples at integer offsets, normalized in f64.
pub fn gaussian_weights(sigma: f64) -> [[f64; 5]; 5] {
    let mut w = [[0.0; 5]; 5];
    let mut sum = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 2.0, j as f64 - 2.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            sum += *v;
        }
    }
    for v in w.iter_mut().flatten() {
        *v /= sum;
    }
    w
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let (abx, aby) = (b.x - a.x, b.y - a.y);
    let len2 = abx * abx + aby * aby;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * abx + (p.y - a.y) * aby) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.x + t * abx, a.y + t * aby);
    ((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt()
}

fn rect_corners(r: &Rect) -> [Vec2; 4] {
    let (c, s) = (r.angle.cos(), r.angle.sin());
    let h = r.half_extents;
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)].map(|(sx, sy)| {
        let (lx, ly) = (sx * h.x, sy * h.y);
        Vec2::new(r.center.x + lx * c - ly * s, r.center.y + lx * s + ly * c)
    })
}

fn inside_rect(r: &Rect, p: Vec2) -> bool {
    let (dx, dy) = (p.x - r.center.x, p.y - r.center.y);
    let (c, s) = (r.angle.cos(), r.angle.sin());
    let (lx, ly) = (dx * c + dy * s, -dx * s + dy * c);
    lx.abs() <= r.half_extents.x && ly.abs() <= r.half_extents.y
}

/// Clearance between a point and the nearest wall or obstacle (0 inside an
/// obstacle).
pub fn clearance(world: &World, p: Vec2) -> f64 {
    let mut best = f64::INFINITY;
    for w in &world.walls {
        best = best.min(point_segment_distance(p, w.a, w.b));
    }
    for o in &world.obstacles {
        if inside_rect(o, p) {
            return 0.0;
        }
        let k = rect_corners(o);
        for i in 0..4 {
            best = best.min(point_segment_distance(p, k[i], k[(i + 1) % 4]));
        }
    }
    best
}

/// Densely resamples the straight path between two centers and reports the
/// smallest clearance seen.
pub fn swept_clearance(world: &World, a: Vec2, b: Vec2, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| {
            let t = i as f64 / samples as f64;
            clearance(world, Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t))
        })
        .fold(f64::INFINITY, f64::min)
}

/// Circle through three points.
pub fn circumradius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let ab = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
    let bc = ((b.x - c.x).powi(2) + (b.y - c.y).powi(2)).sqrt();
    let ca = ((c.x - a.x).powi(2) + (c.y - a.y).powi(2)).sqrt();
    let area2 = ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)).abs();
    ab * bc * ca / (2.0 * area2)
}
