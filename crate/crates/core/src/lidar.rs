//! Occlusion-aware simulated lidar.
//!
//! Rays are cast in the ground plane on a fixed azimuth lattice; each ring
//! adds a fixed elevation tangent, so a ray's height at ground distance `d`
//! is `sensor_height + d * tangent`. A box is hit where the 2D ray first
//! crosses its footprint, provided the ray height there falls inside the
//! box's vertical extent; otherwise the ray passes over (or under) it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::world::{VehicleId, WorldState};

/// Fixed cloud size after downsampling.
pub const CLOUD_SIZE: usize = 2048;

/// What a returned point landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    Vehicle(VehicleId),
    Static(usize),
}

#[derive(Debug, Clone)]
pub struct LidarConfig {
    /// Number of evenly spaced azimuth rays per ring.
    pub azimuth_rays: usize,
    /// Per-ring elevation tangents; negative values point toward the ground.
    pub ring_tangents: Vec<f64>,
    /// Maximum ground-plane range in meters.
    pub max_range: f64,
    /// Roof-mounted sensor height above ground.
    pub sensor_height: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            azimuth_rays: 1440,
            ring_tangents: vec![-0.04, -0.02, -0.01, 0.0],
            max_range: 70.0,
            sensor_height: 1.8,
        }
    }
}

/// Sensor output of one scan.
///
/// `points` always holds exactly [`CLOUD_SIZE`] entries: x and y are
/// sensor-relative (world-aligned axes), z is height above ground so that
/// the voxel slab starts at zero. Only the first `hit_sources.len()` entries
/// are real returns; the remainder is padding (the nearest return repeated),
/// or zero sentinels when the scan hit nothing.
#[derive(Debug, Clone)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub hit_sources: Vec<SurfaceId>,
    pub source_id: VehicleId,
    pub tick: u64,
}

impl PointCloud {
    /// Number of real returns retained in the cloud.
    pub fn hits(&self) -> usize {
        self.hit_sources.len()
    }

    pub fn real_points(&self) -> &[[f64; 3]] {
        &self.points[..self.hit_sources.len()]
    }
}

struct Target {
    footprint: crate::geometry::OrientedBox,
    height: f64,
    source: SurfaceId,
}

/// Casts the configured ray pattern from `sensor_vehicle` and returns a
/// cloud of exactly [`CLOUD_SIZE`] points. Pure function of
/// `(world, sensor id, config, seed)`; the seed only drives the
/// farthest-point downsampling when the scan produced more hits than fit.
pub fn scan(
    world: &WorldState,
    sensor_vehicle: VehicleId,
    config: &LidarConfig,
    seed: u64,
) -> PointCloud {
    let sensor = world
        .vehicle(sensor_vehicle)
        .expect("scan: sensor vehicle exists");
    let origin = (sensor.box_.center.x, sensor.box_.center.y);

    let mut targets: Vec<Target> = Vec::with_capacity(world.vehicles.len());
    for v in &world.vehicles {
        if v.id != sensor_vehicle {
            targets.push(Target {
                footprint: v.box_,
                height: v.box_.height,
                source: SurfaceId::Vehicle(v.id),
            });
        }
    }
    for (i, obs) in world.static_obstacles.iter().enumerate() {
        targets.push(Target {
            footprint: *obs,
            height: obs.height,
            source: SurfaceId::Static(i),
        });
    }

    let n_az = config.azimuth_rays;
    let n_rings = config.ring_tangents.len();
    let az_step = 2.0 * std::f64::consts::PI / n_az as f64;
    // Nearest valid hit per (ring, azimuth), ring-major.
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); n_rings * n_az];

    let mut candidate_azimuths: Vec<usize> = Vec::with_capacity(n_az);
    for (t_idx, target) in targets.iter().enumerate() {
        candidate_azimuths.clear();
        match target.footprint.azimuth_interval(origin) {
            Some((lo, hi)) => {
                let a_lo = ((lo + std::f64::consts::PI) / az_step).floor() as i64 - 1;
                let a_hi = ((hi + std::f64::consts::PI) / az_step).ceil() as i64 + 1;
                for a in a_lo..=a_hi {
                    candidate_azimuths.push(a.rem_euclid(n_az as i64) as usize);
                }
            }
            // Sensor origin inside the footprint: test every azimuth.
            None => candidate_azimuths.extend(0..n_az),
        }
        for &a in &candidate_azimuths {
            let theta = -std::f64::consts::PI + a as f64 * az_step;
            let dir = (theta.cos(), theta.sin());
            let Some(dist) = target.footprint.ray_intersection(origin, dir) else {
                continue;
            };
            if dist > config.max_range {
                continue;
            }
            for (r, &tangent) in config.ring_tangents.iter().enumerate() {
                let height = config.sensor_height + dist * tangent;
                if height < 0.0 || height > target.height {
                    continue;
                }
                let slot = &mut best[r * n_az + a];
                if dist < slot.0 {
                    *slot = (dist, t_idx);
                }
            }
        }
    }

    let mut raw_points: Vec<[f64; 3]> = Vec::new();
    let mut raw_sources: Vec<SurfaceId> = Vec::new();
    for r in 0..n_rings {
        let tangent = config.ring_tangents[r];
        for a in 0..n_az {
            let (dist, t_idx) = best[r * n_az + a];
            if !dist.is_finite() {
                continue;
            }
            let theta = -std::f64::consts::PI + a as f64 * az_step;
            raw_points.push([
                dist * theta.cos(),
                dist * theta.sin(),
                config.sensor_height + dist * tangent,
            ]);
            raw_sources.push(targets[t_idx].source);
        }
    }

    downsample(raw_points, raw_sources, sensor_vehicle, world.tick, seed)
}

fn downsample(
    raw_points: Vec<[f64; 3]>,
    raw_sources: Vec<SurfaceId>,
    source_id: VehicleId,
    tick: u64,
    seed: u64,
) -> PointCloud {
    let n = raw_points.len();
    if n == 0 {
        return PointCloud {
            points: vec![[0.0, 0.0, 0.0]; CLOUD_SIZE],
            hit_sources: vec![],
            source_id,
            tick,
        };
    }
    if n <= CLOUD_SIZE {
        let mut points = raw_points;
        // Pad with the nearest return (first one at minimal ground distance).
        let nearest = points
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                let da = a[0] * a[0] + a[1] * a[1];
                let db = b[0] * b[0] + b[1] * b[1];
                da.partial_cmp(&db).unwrap()
            })
            .map(|(i, _)| i)
            .unwrap();
        let pad = points[nearest];
        points.resize(CLOUD_SIZE, pad);
        return PointCloud {
            points,
            hit_sources: raw_sources,
            source_id,
            tick,
        };
    }

    // Farthest-point sampling down to CLOUD_SIZE, seeded start.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.gen_range(0..n);
    let selected = farthest_point_indices(&raw_points, CLOUD_SIZE, start);
    let points: Vec<[f64; 3]> = selected.iter().map(|&i| raw_points[i]).collect();
    let hit_sources: Vec<SurfaceId> = selected.iter().map(|&i| raw_sources[i]).collect();
    PointCloud {
        points,
        hit_sources,
        source_id,
        tick,
    }
}

/// Greedy farthest-point sampling: picks `k` indices starting from `start`,
/// each maximizing the minimum distance to the points already chosen.
/// When `k >= points.len()` every index is returned.
///
/// This sits on the per-tick hot path (every over-full scan funnels through
/// it), hence the flat single-precision working set: the O(n*k) inner loop
/// has to vectorize.
pub(crate) fn farthest_point_indices(points: &[[f64; 3]], k: usize, start: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return vec![];
    }
    if k >= n {
        return (0..n).collect();
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for p in points {
        xs.push(p[0] as f32);
        ys.push(p[1] as f32);
        zs.push(p[2] as f32);
    }
    let mut min_dist = vec![f32::INFINITY; n];
    let mut selected = Vec::with_capacity(k);
    let mut current = start.min(n - 1);
    for _ in 0..k {
        selected.push(current);
        let (cx, cy, cz) = (xs[current], ys[current], zs[current]);
        for i in 0..n {
            let dx = xs[i] - cx;
            let dy = ys[i] - cy;
            let dz = zs[i] - cz;
            let d = dx * dx + dy * dy + dz * dz;
            min_dist[i] = min_dist[i].min(d);
        }
        let mut next = 0;
        let mut next_dist = f32::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > next_dist {
                next_dist = d;
                next = i;
            }
        }
        current = next;
    }
    selected
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrientedBox, Pose2D};
    use crate::world::{VehicleRole, VehicleState, DT};

    fn vehicle(id: VehicleId, x: f64, y: f64, l: f64, w: f64, h: f64) -> VehicleState {
        VehicleState {
            id,
            box_: OrientedBox::new(Pose2D::new(x, y, 0.0), l, w, h),
            speed: 0.0,
            yaw_rate: 0.0,
            role: if id == 0 {
                VehicleRole::Ego
            } else {
                VehicleRole::Background
            },
            comm_capable: true,
        }
    }

    fn world(vehicles: Vec<VehicleState>) -> WorldState {
        WorldState {
            tick: 0,
            dt: DT,
            vehicles,
            static_obstacles: vec![],
            lights: vec![],
        }
    }

    /// Independent re-intersection oracle: no real return may lie beyond a
    /// nearer obstruction along its own ray.
    fn assert_no_ray_violations(world: &WorldState, cloud: &PointCloud, config: &LidarConfig) {
        let sensor = world.vehicle(cloud.source_id).unwrap();
        let origin = (sensor.box_.center.x, sensor.box_.center.y);
        for p in cloud.real_points() {
            let dist = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let dir = (p[0] / dist, p[1] / dist);
            let tangent = (p[2] - config.sensor_height) / dist;
            for v in &world.vehicles {
                if v.id == cloud.source_id {
                    continue;
                }
                if let Some(t) = v.box_.ray_intersection(origin, dir) {
                    if t < dist - 1e-9 {
                        let h = config.sensor_height + t * tangent;
                        assert!(
                            h < -1e-9 || h > v.box_.height + 1e-9,
                            "point at {dist:.3} m passes through vehicle {} at {t:.3} m",
                            v.id
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn unobstructed_target_points_lie_on_near_face() {
        let w = world(vec![
            vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6),
            vehicle(1, 20.0, 0.0, 4.6, 1.9, 1.6),
        ]);
        let cloud = scan(&w, 0, &LidarConfig::default(), 7);
        assert!(cloud.hits() > 0);
        assert_eq!(cloud.points.len(), CLOUD_SIZE);
        let near_face_x = 20.0 - 4.6 / 2.0;
        for (p, src) in cloud.real_points().iter().zip(&cloud.hit_sources) {
            assert_eq!(*src, SurfaceId::Vehicle(1));
            // Points land on the boundary: either the near face or the
            // side faces of the target footprint.
            let on_near = (p[0] - near_face_x).abs() < 1e-9;
            let on_side = (p[1].abs() - 1.9 / 2.0).abs() < 1e-9;
            assert!(on_near || on_side, "point {p:?} not on target boundary");
        }
        assert_no_ray_violations(&w, &cloud, &LidarConfig::default());
    }

    #[test]
    fn tall_occluder_blocks_target_completely() {
        // Truck (3.5 m tall) fully between sensor and a car behind it.
        let w = world(vec![
            vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6),
            vehicle(1, 15.0, 0.0, 9.0, 6.0, 3.5),
            vehicle(2, 30.0, 0.0, 4.6, 1.9, 1.6),
        ]);
        let cloud = scan(&w, 0, &LidarConfig::default(), 7);
        assert!(cloud.hits() > 0);
        assert!(cloud
            .hit_sources
            .iter()
            .all(|s| *s != SurfaceId::Vehicle(2)));
        assert_no_ray_violations(&w, &cloud, &LidarConfig::default());
    }

    #[test]
    fn occlusion_is_viewpoint_dependent() {
        // Truck blocks the ego's line of sight to the far car, while a
        // fourth vehicle off to the side sees it unobstructed.
        let w = world(vec![
            vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6),
            vehicle(1, 15.0, 0.0, 9.0, 2.6, 3.5),
            vehicle(2, 30.0, 0.0, 4.6, 1.9, 1.6),
            vehicle(3, 25.0, 15.0, 4.6, 1.9, 1.6),
        ]);
        let config = LidarConfig::default();
        let ego_cloud = scan(&w, 0, &config, 7);
        assert!(ego_cloud
            .hit_sources
            .iter()
            .all(|s| *s != SurfaceId::Vehicle(2)));
        let witness_cloud = scan(&w, 3, &config, 7);
        let collider_hits = witness_cloud
            .hit_sources
            .iter()
            .filter(|s| **s == SurfaceId::Vehicle(2))
            .count();
        assert!(collider_hits >= 5, "witness sees {collider_hits} points");
        assert_no_ray_violations(&w, &ego_cloud, &config);
        assert_no_ray_violations(&w, &witness_cloud, &config);
    }

    #[test]
    fn empty_scene_yields_zero_padded_sentinel() {
        let w = world(vec![vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6)]);
        let cloud = scan(&w, 0, &LidarConfig::default(), 7);
        assert_eq!(cloud.hits(), 0);
        assert_eq!(cloud.points.len(), CLOUD_SIZE);
        assert!(cloud.points.iter().all(|p| *p == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn downsampling_is_deterministic_and_sized() {
        // Ring of nearby trucks produces more raw hits than CLOUD_SIZE.
        let mut vehicles = vec![vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6)];
        for i in 0..12 {
            let a = i as f64 / 12.0 * std::f64::consts::TAU;
            vehicles.push(vehicle(
                i + 1,
                12.0 * a.cos(),
                12.0 * a.sin(),
                9.0,
                2.6,
                3.5,
            ));
        }
        let w = world(vehicles);
        let config = LidarConfig::default();
        let a = scan(&w, 0, &config, 42);
        let b = scan(&w, 0, &config, 42);
        assert_eq!(a.points, b.points);
        assert_eq!(a.points.len(), CLOUD_SIZE);
        assert_eq!(a.hits(), CLOUD_SIZE);
        let c = scan(&w, 0, &config, 43);
        assert_eq!(c.points.len(), CLOUD_SIZE);
        assert_no_ray_violations(&w, &a, &config);
    }

    #[test]
    fn range_limit_respected() {
        let w = world(vec![
            vehicle(0, 0.0, 0.0, 4.6, 1.9, 1.6),
            vehicle(1, 70.0 + 6.0, 0.0, 4.6, 1.9, 1.6),
        ]);
        let cloud = scan(&w, 0, &LidarConfig::default(), 7);
        assert_eq!(cloud.hits(), 0);
    }
}
