//! Birds-eye-view voxelization, heatmap-cell coordinate recovery, and the
//! deterministic occlusion-based detector.
//!
//! The voxel volume spans 140 x 140 m around the sensing agent and 5 m up
//! from the ground at 0.5 m resolution; the detection heatmap downsamples
//! the footprint by a factor of 4, giving 70 x 70 cells of 2 m. A reported
//! center decomposes into a cell index plus a fractional offset in meters,
//! and recovers as `cell * scale * resolution - extent/2 + offset`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lidar::{PointCloud, SurfaceId};
use crate::world::{VehicleId, WorldState};

/// Ground-plane extent of the voxel volume in meters (per axis).
pub const GRID_EXTENT_M: f64 = 140.0;
/// Vertical extent of the voxel volume in meters.
pub const GRID_HEIGHT_M: f64 = 5.0;
/// Voxel edge length in meters (all axes).
pub const VOXEL_RESOLUTION: f64 = 0.5;
/// Voxels per ground axis.
pub const GRID_CELLS: usize = 280;
/// Voxels along the vertical axis.
pub const GRID_CELLS_Z: usize = 10;
/// Heatmap spatial scale factor.
pub const HEATMAP_SCALE: usize = 4;
/// Heatmap cells per axis.
pub const HEATMAP_CELLS: usize = 70;
/// Minimum lidar points for a voxel to count as occupied.
pub const VOXEL_MIN_POINTS: usize = 3;
/// Cap on detections reported by a single vehicle.
pub const MAX_DETECTIONS: usize = 50;
/// Minimum score for a detection to be emitted.
pub const SCORE_THRESHOLD: f64 = 0.2;

/// Binary occupancy volume around the sensing agent.
///
/// Voxels are addressed as `(ix, iy, iz)` with the agent at the footprint
/// center; a voxel is occupied when at least [`VOXEL_MIN_POINTS`] real
/// returns fell inside it. Stored as a sorted index list since a
/// 2048-point cloud touches at most a few hundred voxels.
#[derive(Debug, Clone)]
pub struct BevGrid {
    occupied: Vec<u32>,
    pub source_id: VehicleId,
    pub tick: u64,
}

impl BevGrid {
    pub fn is_occupied(&self, ix: usize, iy: usize, iz: usize) -> bool {
        if ix >= GRID_CELLS || iy >= GRID_CELLS || iz >= GRID_CELLS_Z {
            return false;
        }
        self.occupied.binary_search(&pack_voxel(ix, iy, iz)).is_ok()
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.len()
    }

    pub fn occupied_voxels(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.occupied.iter().map(|&p| unpack_voxel(p))
    }
}

fn pack_voxel(ix: usize, iy: usize, iz: usize) -> u32 {
    ((ix * GRID_CELLS + iy) * GRID_CELLS_Z + iz) as u32
}

fn unpack_voxel(p: u32) -> (usize, usize, usize) {
    let p = p as usize;
    (
        p / (GRID_CELLS * GRID_CELLS_Z),
        (p / GRID_CELLS_Z) % GRID_CELLS,
        p % GRID_CELLS_Z,
    )
}

/// Maps a sensor-relative point to its voxel index, or `None` when it falls
/// outside the volume.
pub fn voxel_index(point: [f64; 3]) -> Option<(usize, usize, usize)> {
    let half = GRID_EXTENT_M / 2.0;
    let ix = ((point[0] + half) / VOXEL_RESOLUTION).floor();
    let iy = ((point[1] + half) / VOXEL_RESOLUTION).floor();
    let iz = (point[2] / VOXEL_RESOLUTION).floor();
    if ix < 0.0 || iy < 0.0 || iz < 0.0 {
        return None;
    }
    let (ix, iy, iz) = (ix as usize, iy as usize, iz as usize);
    if ix >= GRID_CELLS || iy >= GRID_CELLS || iz >= GRID_CELLS_Z {
        return None;
    }
    Some((ix, iy, iz))
}

/// Voxelizes the real returns of a cloud into a [`BevGrid`].
///
/// Padding entries are sensor artifacts, not returns, and are excluded from
/// the occupancy counts.
pub fn voxelize(cloud: &PointCloud) -> BevGrid {
    let mut keys: Vec<u32> = cloud
        .real_points()
        .iter()
        .filter_map(|p| voxel_index(*p).map(|(ix, iy, iz)| pack_voxel(ix, iy, iz)))
        .collect();
    keys.sort_unstable();
    let mut occupied = Vec::new();
    let mut run_start = 0;
    for i in 0..keys.len() {
        if i + 1 == keys.len() || keys[i + 1] != keys[i] {
            if i + 1 - run_start >= VOXEL_MIN_POINTS {
                occupied.push(keys[i]);
            }
            run_start = i + 1;
        }
    }
    BevGrid {
        occupied,
        source_id: cloud.source_id,
        tick: cloud.tick,
    }
}

/// Heatmap cell plus fractional center offset in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellIndex {
    pub x_ch: usize,
    pub y_ch: usize,
    pub x_co: f64,
    pub y_co: f64,
}

#[derive(Debug, Error, PartialEq)]
#[error("position ({x}, {y}) outside the +/-{half} m detection extent")]
pub struct ExtentError {
    pub x: f64,
    pub y: f64,
    pub half: f64,
}

/// Recovers the 2D center position encoded by a heatmap cell and offset.
pub fn recover_center(cell: &CellIndex) -> (f64, f64) {
    let stride = HEATMAP_SCALE as f64 * VOXEL_RESOLUTION;
    let half = GRID_EXTENT_M / 2.0;
    (
        cell.x_ch as f64 * stride - half + cell.x_co,
        cell.y_ch as f64 * stride - half + cell.y_co,
    )
}

/// Inverse of [`recover_center`]: decomposes an in-extent position into its
/// heatmap cell and offset. Errors outside the open extent `(-70, 70)`.
pub fn locate_cell(x: f64, y: f64) -> Result<CellIndex, ExtentError> {
    let half = GRID_EXTENT_M / 2.0;
    if x.abs() >= half || y.abs() >= half || !x.is_finite() || !y.is_finite() {
        return Err(ExtentError { x, y, half });
    }
    let stride = HEATMAP_SCALE as f64 * VOXEL_RESOLUTION;
    let x_ch = (((x + half) / stride).floor() as usize).min(HEATMAP_CELLS - 1);
    let y_ch = (((y + half) / stride).floor() as usize).min(HEATMAP_CELLS - 1);
    Ok(CellIndex {
        x_ch,
        y_ch,
        x_co: x - (x_ch as f64 * stride - half),
        y_co: y - (y_ch as f64 * stride - half),
    })
}

/// One detected object: center position in the sensing vehicle's frame
/// (world-aligned axes, origin at the sensor), box size, and yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
    pub score: f64,
}

impl Detection {
    pub fn center_2d(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionList {
    pub detections: Vec<Detection>,
    pub source_id: VehicleId,
    pub tick: u64,
}

impl DetectionList {
    pub fn centers_2d(&self) -> Vec<(f64, f64)> {
        self.detections.iter().map(|d| d.center_2d()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct DetectorConfig {
    /// Minimum real returns on a vehicle for it to be detected.
    pub hit_min: usize,
    /// Standard deviation of the center position noise, meters.
    pub noise_sigma: f64,
    /// Hits are scaled by this divisor into the `[0, 1]` score.
    pub score_hits_divisor: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            hit_min: 5,
            noise_sigma: 0.1,
            score_hits_divisor: 20.0,
        }
    }
}

/// Deterministic stand-in detector: a vehicle is detected iff enough real
/// returns landed on it. Reported centers are the true centers plus seeded
/// Gaussian noise, snapped through the heatmap cell decomposition so they
/// carry exactly the cell/offset quantization semantics.
pub fn detect<R: Rng>(
    world: &WorldState,
    cloud: &PointCloud,
    sensor_vehicle: VehicleId,
    config: &DetectorConfig,
    rng: &mut R,
) -> DetectionList {
    let sensor = world
        .vehicle(sensor_vehicle)
        .expect("detect: sensor vehicle exists");
    let (sx, sy) = sensor.position();

    let max_id = world.vehicles.iter().map(|v| v.id).max().unwrap_or(0) as usize;
    let mut hits_by_vehicle = vec![0usize; max_id + 1];
    for src in &cloud.hit_sources {
        if let SurfaceId::Vehicle(id) = src {
            if (*id as usize) <= max_id {
                hits_by_vehicle[*id as usize] += 1;
            }
        }
    }

    let normal = Normal::new(0.0, config.noise_sigma.max(0.0)).expect("valid sigma");
    let mut candidates: Vec<&crate::world::VehicleState> = world
        .vehicles
        .iter()
        .filter(|v| v.id != sensor_vehicle)
        .collect();
    candidates.sort_by_key(|v| v.id);

    let mut detections = Vec::new();
    for v in candidates {
        let hits = hits_by_vehicle[v.id as usize];
        if hits < config.hit_min {
            continue;
        }
        let (nx, ny) = if config.noise_sigma > 0.0 {
            (normal.sample(rng), normal.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let raw_x = v.box_.center.x - sx + nx;
        let raw_y = v.box_.center.y - sy + ny;
        let Ok(cell) = locate_cell(raw_x, raw_y) else {
            continue;
        };
        let (x, y) = recover_center(&cell);
        let score = (hits as f64 / config.score_hits_divisor).min(1.0);
        if score < SCORE_THRESHOLD {
            continue;
        }
        detections.push(Detection {
            x,
            y,
            z: v.box_.height / 2.0,
            length: v.box_.length,
            width: v.box_.width,
            height: v.box_.height,
            yaw: v.box_.center.heading,
            score,
        });
    }
    detections.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    detections.truncate(MAX_DETECTIONS);
    DetectionList {
        detections,
        source_id: sensor_vehicle,
        tick: cloud.tick,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{OrientedBox, Pose2D};
    use crate::lidar::CLOUD_SIZE;
    use crate::world::{VehicleRole, VehicleState, DT};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud_with(points: Vec<[f64; 3]>, sources: Vec<SurfaceId>) -> PointCloud {
        let mut pts = points;
        let pad = pts.first().copied().unwrap_or([0.0, 0.0, 0.0]);
        pts.resize(CLOUD_SIZE, pad);
        PointCloud {
            points: pts,
            hit_sources: sources,
            source_id: 0,
            tick: 0,
        }
    }

    #[test]
    fn three_points_occupy_center_voxel() {
        let pts = vec![[0.0, 0.0, 0.25]; 3];
        let sources = vec![SurfaceId::Vehicle(1); 3];
        let grid = voxelize(&cloud_with(pts, sources));
        assert!(grid.is_occupied(140, 140, 0));
        assert_eq!(grid.occupied_count(), 1);
    }

    #[test]
    fn two_points_insufficient() {
        let pts = vec![[0.0, 0.0, 0.25]; 2];
        let sources = vec![SurfaceId::Vehicle(1); 2];
        let grid = voxelize(&cloud_with(pts, sources));
        assert_eq!(grid.occupied_count(), 0);
    }

    #[test]
    fn out_of_extent_point_discarded() {
        let pts = vec![[71.0, 0.0, 0.25]; 3];
        let sources = vec![SurfaceId::Vehicle(1); 3];
        let grid = voxelize(&cloud_with(pts, sources));
        assert_eq!(grid.occupied_count(), 0);
        assert_eq!(voxel_index([71.0, 0.0, 0.25]), None);
        assert_eq!(voxel_index([0.0, 0.0, 5.1]), None);
    }

    #[test]
    fn recover_center_examples() {
        let c = |x_ch, x_co| CellIndex {
            x_ch,
            y_ch: 0,
            x_co,
            y_co: 0.0,
        };
        assert_eq!(recover_center(&c(0, 0.0)).0, -70.0);
        assert_eq!(recover_center(&c(35, 0.0)).0, 0.0);
        assert!((recover_center(&c(35, 0.3)).0 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn locate_cell_examples() {
        let cell = locate_cell(-70.0 + 1e-12, -70.0 + 1e-12).unwrap();
        assert_eq!((cell.x_ch, cell.y_ch), (0, 0));
        assert!(locate_cell(70.0, 0.0).is_err());
        assert!(locate_cell(0.0, -70.0).is_err());

        let (x, y) = recover_center(&locate_cell(12.3, -4.7).unwrap());
        assert!((x - 12.3).abs() < 1e-9);
        assert!((y + 4.7).abs() < 1e-9);
    }

    fn vehicle(id: VehicleId, x: f64, y: f64, role: VehicleRole) -> VehicleState {
        VehicleState {
            id,
            box_: OrientedBox::new(Pose2D::new(x, y, 0.0), 4.6, 1.9, 1.6),
            speed: 0.0,
            yaw_rate: 0.0,
            role,
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

    #[test]
    fn zero_hit_vehicle_not_detected() {
        let w = world(vec![
            vehicle(0, 0.0, 0.0, VehicleRole::Ego),
            vehicle(1, 30.0, 0.0, VehicleRole::Background),
        ]);
        let cloud = cloud_with(vec![], vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = detect(&w, &cloud, 0, &DetectorConfig::default(), &mut rng);
        assert!(dets.detections.is_empty());
    }

    #[test]
    fn detection_cap_at_fifty() {
        let mut vehicles = vec![vehicle(0, 0.0, 0.0, VehicleRole::Ego)];
        let mut points = Vec::new();
        let mut sources = Vec::new();
        for i in 1..=60 {
            vehicles.push(vehicle(i, i as f64, 10.0, VehicleRole::Background));
            for _ in 0..10 {
                points.push([i as f64, 10.0, 0.5]);
                sources.push(SurfaceId::Vehicle(i));
            }
        }
        let w = world(vehicles);
        let cloud = cloud_with(points, sources);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = detect(&w, &cloud, 0, &DetectorConfig::default(), &mut rng);
        assert_eq!(dets.detections.len(), MAX_DETECTIONS);
        assert!(dets.detections.iter().all(|d| d.score >= SCORE_THRESHOLD));
        for pair in dets.detections.windows(2) {
            assert!(pair[0].score >= pair[1].score);
        }
    }

    #[test]
    fn noise_free_center_matches_cell_roundtrip() {
        let w = world(vec![
            vehicle(0, 0.0, 0.0, VehicleRole::Ego),
            vehicle(1, 10.0, 5.0, VehicleRole::Background),
        ]);
        let points = vec![[10.0, 5.0, 0.5]; 8];
        let sources = vec![SurfaceId::Vehicle(1); 8];
        let cloud = cloud_with(points, sources);
        let config = DetectorConfig {
            noise_sigma: 0.0,
            ..DetectorConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = detect(&w, &cloud, 0, &config, &mut rng);
        assert_eq!(dets.detections.len(), 1);
        let expected = recover_center(&locate_cell(10.0, 5.0).unwrap());
        assert_eq!(dets.detections[0].center_2d(), expected);
        assert!((dets.detections[0].x - 10.0).abs() < 1e-9);
    }

    #[test]
    fn below_hit_min_not_detected() {
        let w = world(vec![
            vehicle(0, 0.0, 0.0, VehicleRole::Ego),
            vehicle(1, 10.0, 5.0, VehicleRole::Background),
        ]);
        let points = vec![[10.0, 5.0, 0.5]; 4];
        let sources = vec![SurfaceId::Vehicle(1); 4];
        let cloud = cloud_with(points, sources);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dets = detect(&w, &cloud, 0, &DetectorConfig::default(), &mut rng);
        assert!(dets.detections.is_empty());
    }
}
