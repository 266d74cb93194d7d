//! Ground-plane geometry: poses, oriented boxes, separating-axis overlap
//! tests, and ray/box intersection used by the simulated lidar.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Position and heading on the ground plane. Heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Unit vector of the heading.
    pub fn direction(&self) -> (f64, f64) {
        (self.heading.cos(), self.heading.sin())
    }
}

/// Rectangular footprint with a height, centered on a pose. `length` runs
/// along the heading, `width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedBox {
    pub center: Pose2D,
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl OrientedBox {
    pub fn new(center: Pose2D, length: f64, width: f64, height: f64) -> Self {
        debug_assert!(length >= width && width > 0.0 && height > 0.0);
        Self {
            center,
            length,
            width,
            height,
        }
    }

    /// Footprint corners in world coordinates, counter-clockwise.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (c, s) = (self.center.heading.cos(), self.center.heading.sin());
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[lx, ly]| {
            [
                self.center.x + lx * c - ly * s,
                self.center.y + lx * s + ly * c,
            ]
        })
    }

    /// Same footprint grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> OrientedBox {
        OrientedBox {
            center: self.center,
            length: self.length + 2.0 * margin,
            width: self.width + 2.0 * margin,
            height: self.height,
        }
    }

    /// True when the 2D point lies inside or on the footprint (tolerance `eps`).
    pub fn contains_point(&self, x: f64, y: f64, eps: f64) -> bool {
        let (c, s) = (self.center.heading.cos(), self.center.heading.sin());
        let dx = x - self.center.x;
        let dy = y - self.center.y;
        let lx = dx * c + dy * s;
        let ly = -dx * s + dy * c;
        lx.abs() <= self.length / 2.0 + eps && ly.abs() <= self.width / 2.0 + eps
    }

    /// Separating-axis overlap test between two footprints.
    pub fn overlaps(&self, other: &OrientedBox) -> bool {
        let a = self.corners();
        let b = other.corners();
        let axes = [
            axis_of(&a, 0),
            axis_of(&a, 1),
            axis_of(&b, 0),
            axis_of(&b, 1),
        ];
        for axis in axes {
            let (min_a, max_a) = project(&a, axis);
            let (min_b, max_b) = project(&b, axis);
            if max_a < min_b || max_b < min_a {
                return false;
            }
        }
        true
    }

    /// Distance along a 2D ray from `origin` in direction `dir` (unit vector)
    /// to the first crossing of the footprint boundary, if any.
    ///
    /// Slab test in the box frame. An origin inside the box reports distance
    /// zero.
    pub fn ray_intersection(&self, origin: (f64, f64), dir: (f64, f64)) -> Option<f64> {
        let (c, s) = (self.center.heading.cos(), self.center.heading.sin());
        // Ray in box-local coordinates.
        let ox = (origin.0 - self.center.x) * c + (origin.1 - self.center.y) * s;
        let oy = -(origin.0 - self.center.x) * s + (origin.1 - self.center.y) * c;
        let dx = dir.0 * c + dir.1 * s;
        let dy = -dir.0 * s + dir.1 * c;

        let mut t_min: f64 = 0.0;
        let mut t_max = f64::INFINITY;
        for (o, d, half) in [(ox, dx, self.length / 2.0), (oy, dy, self.width / 2.0)] {
            if d.abs() < 1e-12 {
                if o.abs() > half {
                    return None;
                }
            } else {
                let t1 = (-half - o) / d;
                let t2 = (half - o) / d;
                let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
                t_min = t_min.max(lo);
                t_max = t_max.min(hi);
                if t_min > t_max {
                    return None;
                }
            }
        }
        Some(t_min)
    }

    /// Azimuth interval `[lo, hi]` (radians, possibly wrapping) subtended by
    /// the footprint as seen from `origin`, or `None` when `origin` is inside.
    pub fn azimuth_interval(&self, origin: (f64, f64)) -> Option<(f64, f64)> {
        if self.contains_point(origin.0, origin.1, 0.0) {
            return None;
        }
        let center_bearing = (self.center.y - origin.1).atan2(self.center.x - origin.0);
        let mut half_span: f64 = 0.0;
        for [cx, cy] in self.corners() {
            let bearing = (cy - origin.1).atan2(cx - origin.0);
            let delta = normalize_angle(bearing - center_bearing).abs();
            half_span = half_span.max(delta);
        }
        Some((center_bearing - half_span, center_bearing + half_span))
    }
}

fn axis_of(corners: &[[f64; 2]; 4], edge: usize) -> (f64, f64) {
    let a = corners[edge];
    let b = corners[(edge + 1) % 4];
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len = (ex * ex + ey * ey).sqrt();
    (-ey / len, ex / len)
}

fn project(corners: &[[f64; 2]; 4], axis: (f64, f64)) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for [x, y] in corners {
        let p = x * axis.0 + y * axis.1;
        min = min.min(p);
        max = max.max(p);
    }
    (min, max)
}
