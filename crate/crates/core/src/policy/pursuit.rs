//! Polyline routes, pure-pursuit steering, and proportional speed control.

use crate::geometry::{normalize_angle, Pose2D};
use crate::world::{ControlSignal, MAX_STEER_ANGLE, WHEELBASE};

/// Piecewise-linear route with precomputed cumulative arc lengths.
#[derive(Debug, Clone)]
pub struct Polyline {
    points: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        assert!(points.len() >= 2, "route needs at least two points");
        let mut cumulative = Vec::with_capacity(points.len());
        let mut total = 0.0;
        cumulative.push(0.0);
        for pair in points.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            total += ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            cumulative.push(total);
        }
        Self { points, cumulative }
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Point at arc length `s`, clamped to the route ends.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        if i + 1 >= self.points.len() {
            return *self.points.last().unwrap();
        }
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let f = if seg > 1e-12 {
            (s - self.cumulative[i]) / seg
        } else {
            0.0
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1))
    }

    /// Route tangent (unit heading) at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.length());
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => (i - 1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        (b.1 - a.1).atan2(b.0 - a.0)
    }

    /// Arc length of the closest route point to `pos`.
    pub fn project(&self, pos: (f64, f64)) -> f64 {
        let mut best_s = 0.0;
        let mut best_d2 = f64::INFINITY;
        for (i, pair) in self.points.windows(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            let (abx, aby) = (b.0 - a.0, b.1 - a.1);
            let len2 = abx * abx + aby * aby;
            let t = if len2 > 1e-12 {
                (((pos.0 - a.0) * abx + (pos.1 - a.1) * aby) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (px, py) = (a.0 + t * abx, a.1 + t * aby);
            let d2 = (pos.0 - px).powi(2) + (pos.1 - py).powi(2);
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = self.cumulative[i] + t * len2.sqrt();
            }
        }
        best_s
    }
}

/// Pure-pursuit steering toward the route point `lookahead` meters beyond
/// the vehicle's projection. Returns the normalized steer command.
pub fn pure_pursuit_steer(pose: &Pose2D, route: &Polyline, lookahead: f64) -> f64 {
    let s = route.project((pose.x, pose.y));
    let target = route.point_at(s + lookahead);
    let alpha = normalize_angle((target.1 - pose.y).atan2(target.0 - pose.x) - pose.heading);
    let steer_angle = (2.0 * WHEELBASE * alpha.sin()).atan2(lookahead);
    (steer_angle / MAX_STEER_ANGLE).clamp(-1.0, 1.0)
}

/// Proportional throttle/brake toward a desired speed.
pub fn speed_control(current: f64, desired: f64) -> (f64, f64) {
    let err = desired - current;
    if err >= 0.0 {
        ((err * 0.6).clamp(0.0, 1.0), 0.0)
    } else {
        (0.0, (-err * 0.6).clamp(0.0, 1.0))
    }
}

/// Combined route-following command at a desired speed.
pub fn follow_route(pose: &Pose2D, speed: f64, route: &Polyline, desired: f64) -> ControlSignal {
    let lookahead = (speed * 0.8).clamp(3.0, 8.0);
    let steer = pure_pursuit_steer(pose, route, lookahead);
    let (throttle, brake) = speed_control(speed, desired);
    ControlSignal::new(throttle, brake, steer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_arithmetic() {
        let line = Polyline::new(vec![(0.0, 0.0), (10.0, 0.0), (10.0, 5.0)]);
        assert_eq!(line.length(), 15.0);
        assert_eq!(line.point_at(5.0), (5.0, 0.0));
        assert_eq!(line.point_at(12.0), (10.0, 2.0));
        assert_eq!(line.point_at(100.0), (10.0, 5.0));
        assert!((line.project((3.0, 4.0)) - 3.0).abs() < 1e-12);
        assert!((line.tangent_at(12.0) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn pursuit_steers_toward_route() {
        let route = Polyline::new(vec![(0.0, 0.0), (50.0, 0.0)]);
        // Vehicle left of the route heading along it: steer right (negative).
        let pose = Pose2D::new(5.0, 2.0, 0.0);
        assert!(pure_pursuit_steer(&pose, &route, 4.0) < 0.0);
        // On the route, aligned: no steering.
        let pose = Pose2D::new(5.0, 0.0, 0.0);
        assert!(pure_pursuit_steer(&pose, &route, 4.0).abs() < 1e-9);
    }

    #[test]
    fn speed_control_signs() {
        let (t, b) = speed_control(2.0, 5.0);
        assert!(t > 0.0 && b == 0.0);
        let (t, b) = speed_control(5.0, 0.0);
        assert!(t == 0.0 && b > 0.0);
    }
}
