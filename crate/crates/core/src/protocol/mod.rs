//! Two-round selective communication.
//!
//! Round 1: every vehicle in the selection scope sends the 2D centers of
//! its detected objects. The ego scores each sender by how many of those
//! objects it misses itself (an object counts when it is more than half a
//! meter from every ego detection), picks the top `n_c` senders, and
//! requests their point features in round 2. The random baseline skips
//! round 1 entirely and samples `n_c` scope members uniformly.

mod bandwidth;
mod transport;
mod wire;

pub use bandwidth::{
    bandwidth_totals, bytes_per_s_to_mbps, BandwidthLedger, BandwidthReport, SelectionStrategy,
    BITS_PER_MBPS, FRAME_HZ, ROUND1_MAX_PAYLOAD_BYTES,
};
pub use transport::{InprocTransport, MessageTransport, UdpTransport};
pub use wire::{
    Keypoint, Round1Message, Round2Message, Round2Request, WireError, FEATURE_DIMS, HEADER_BYTES,
    FLOATS_PER_KEYPOINT, KEYPOINT_COUNT, REQUEST_PAYLOAD_BYTES, ROUND2_PAYLOAD_BYTES,
};

use std::collections::BTreeMap;
use std::io;

use rand::Rng;

use crate::lidar::{self, LidarConfig, PointCloud};
use crate::perception::{self, detect, voxelize, Detection, DetectionList, DetectorConfig};
use crate::world::{VehicleId, WorldState};

/// Two detections closer than this are treated as the same object (both in
/// utility scoring and in fused-set deduplication).
pub const MISS_DISTANCE: f64 = 0.5;
/// Default communication range in meters.
pub const DEFAULT_COMM_RANGE: f64 = 70.0;
/// Received detections this close to the ego center are the ego itself
/// (anything genuinely that close would already be a collision).
pub const SELF_FILTER_RADIUS: f64 = 1.5;

/// Candidate pool for peer selection: the `n_s` nearest communication-capable
/// vehicles in range.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScope {
    pub ego_id: VehicleId,
    pub members: Vec<VehicleId>,
    /// Set when fewer than `n_s` candidates were in range.
    pub degenerate: bool,
}

/// Vehicles actually selected to transmit point features.
#[derive(Debug, Clone, PartialEq)]
pub struct CommScope {
    pub members: Vec<VehicleId>,
}

/// Picks the `n_s` comm-capable vehicles nearest the ego, ties broken by
/// lower id. A short candidate pool is returned whole and flagged.
pub fn build_selection_scope(
    world: &WorldState,
    ego: VehicleId,
    n_s: usize,
    comm_range: f64,
) -> SelectionScope {
    let ego_state = world.vehicle(ego).expect("ego exists");
    let (ex, ey) = ego_state.position();
    let mut candidates: Vec<(f64, VehicleId)> = world
        .vehicles
        .iter()
        .filter(|v| v.id != ego && v.comm_capable)
        .filter_map(|v| {
            let (x, y) = v.position();
            let dist = ((x - ex).powi(2) + (y - ey).powi(2)).sqrt();
            (dist <= comm_range).then_some((dist, v.id))
        })
        .collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let degenerate = candidates.len() < n_s;
    SelectionScope {
        ego_id: ego,
        members: candidates.into_iter().take(n_s).map(|(_, id)| id).collect(),
        degenerate,
    }
}

/// Indicator of whether the ego misses an object: 1 iff the object center is
/// strictly farther than [`MISS_DISTANCE`] from every ego center (vacuously
/// 1 when the ego has none). Both centers must share a frame.
pub fn object_utility(obj_center: (f64, f64), ego_centers: &[(f64, f64)]) -> u32 {
    let missed = ego_centers.iter().all(|&(x, y)| {
        let d2 = (obj_center.0 - x).powi(2) + (obj_center.1 - y).powi(2);
        d2 > MISS_DISTANCE * MISS_DISTANCE
    });
    missed as u32
}

/// Utility of one sender: the number of its reported objects the ego misses.
pub fn vehicle_utility(object_centers: &[(f64, f64)], ego_centers: &[(f64, f64)]) -> u32 {
    object_centers
        .iter()
        .map(|&c| object_utility(c, ego_centers))
        .sum()
}

/// Selects the top `n_c` vehicles by utility, ties broken by distance to the
/// ego and then lower id. A pool smaller than `n_c` is returned whole.
pub fn select_comm_scope(
    scores: &BTreeMap<VehicleId, u32>,
    n_c: usize,
    world: &WorldState,
    ego: VehicleId,
) -> CommScope {
    let ego_state = world.vehicle(ego).expect("ego exists");
    let (ex, ey) = ego_state.position();
    let mut ranked: Vec<(VehicleId, u32, f64)> = scores
        .iter()
        .map(|(&id, &score)| {
            let dist = world
                .vehicle(id)
                .map(|v| {
                    let (x, y) = v.position();
                    ((x - ex).powi(2) + (y - ey).powi(2)).sqrt()
                })
                .unwrap_or(f64::INFINITY);
            (id, score, dist)
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
            .then_with(|| a.0.cmp(&b.0))
    });
    CommScope {
        members: ranked.into_iter().take(n_c).map(|(id, _, _)| id).collect(),
    }
}

/// Uniform sample of `n_c` scope members without replacement, sorted by id.
/// An undersized scope is returned whole.
pub fn select_random_scope<R: Rng>(scope: &SelectionScope, n_c: usize, rng: &mut R) -> CommScope {
    if scope.members.len() <= n_c {
        return CommScope {
            members: scope.members.clone(),
        };
    }
    let picked = rand::seq::index::sample(rng, scope.members.len(), n_c);
    let mut members: Vec<VehicleId> = picked.iter().map(|i| scope.members[i]).collect();
    members.sort_unstable();
    CommScope { members }
}

/// Everything the exchange needs to produce clouds and detections.
#[derive(Debug, Clone)]
pub struct ExchangeConfig {
    pub n_s: usize,
    pub n_c: usize,
    pub comm_range: f64,
    pub lidar: LidarConfig,
    pub detector: DetectorConfig,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            n_s: 6,
            n_c: 3,
            comm_range: DEFAULT_COMM_RANGE,
            lidar: LidarConfig::default(),
            detector: DetectorConfig::default(),
        }
    }
}

/// Result of one tick of communication.
#[derive(Debug, Clone)]
pub struct ExchangeOutput {
    pub selection_scope: SelectionScope,
    pub comm_scope: CommScope,
    /// Ego detections plus the selected senders' detections in the ego
    /// frame, deduplicated by the miss-distance rule.
    pub fused: DetectionList,
    /// Round-1 utilities per scope member; empty under the random strategy.
    pub utilities: BTreeMap<VehicleId, u32>,
}

/// Runs one communication frame for the ego.
///
/// `detector_rng` drives scan downsampling and detector noise;
/// `selection_rng` drives only the random baseline's sampling, so selective
/// and random runs over the same world see identical perception.
#[allow(clippy::too_many_arguments)]
pub fn run_exchange<R: Rng>(
    world: &WorldState,
    ego: VehicleId,
    strategy: SelectionStrategy,
    config: &ExchangeConfig,
    detector_rng: &mut R,
    selection_rng: &mut R,
    transport: &mut dyn MessageTransport,
    ledger: &mut BandwidthLedger,
) -> io::Result<ExchangeOutput> {
    let scope = build_selection_scope(world, ego, config.n_s, config.comm_range);
    let tick = world.tick as u32;

    let ego_seed = detector_rng.gen::<u64>();
    let ego_cloud = lidar::scan(world, ego, &config.lidar, ego_seed);
    let ego_dets = detect(world, &ego_cloud, ego, &config.detector, detector_rng);

    // Per-member perception runs for every scope member under the selective
    // strategy (they all transmit in round 1) but only for the selected
    // members under the random baseline.
    let mut member_perception: BTreeMap<VehicleId, (PointCloud, DetectionList)> = BTreeMap::new();
    let perceive = |member: VehicleId, rng: &mut R| -> (PointCloud, DetectionList) {
        let seed = rng.gen::<u64>();
        let cloud = lidar::scan(world, member, &config.lidar, seed);
        let dets = detect(world, &cloud, member, &config.detector, rng);
        (cloud, dets)
    };

    let (comm_scope, utilities) = match strategy {
        SelectionStrategy::Selective => {
            let ego_pos = world.vehicle(ego).expect("ego exists").position();
            // The ego's own position counts as known when scoring: a sender
            // earns nothing for reporting the ego itself.
            let mut ego_centers_world: Vec<(f64, f64)> = ego_dets
                .detections
                .iter()
                .map(|d| (d.x + ego_pos.0, d.y + ego_pos.1))
                .collect();
            ego_centers_world.push(ego_pos);
            let mut utilities = BTreeMap::new();
            for &member in &scope.members {
                let (cloud, dets) = perceive(member, detector_rng);
                let msg = Round1Message {
                    source_id: member,
                    tick,
                    centers: dets
                        .detections
                        .iter()
                        .map(|d| (d.x as f32, d.y as f32))
                        .collect(),
                };
                let bytes = transport.deliver(member, ego, &msg.encode())?;
                let received =
                    Round1Message::decode(&bytes).map_err(|e| io::Error::other(e.to_string()))?;
                ledger.record(member, received.payload_len());

                let member_pos = world
                    .vehicle(member)
                    .expect("scope member exists")
                    .position();
                let centers_world: Vec<(f64, f64)> = received
                    .centers
                    .iter()
                    .map(|&(x, y)| (x as f64 + member_pos.0, y as f64 + member_pos.1))
                    .collect();
                utilities.insert(member, vehicle_utility(&centers_world, &ego_centers_world));
                member_perception.insert(member, (cloud, dets));
            }
            let comm = select_comm_scope(&utilities, config.n_c, world, ego);

            for &target in &comm.members {
                let request = Round2Request {
                    target_id: target,
                    tick,
                    token: target as f32,
                };
                let bytes = transport.deliver(ego, target, &request.encode())?;
                let received =
                    Round2Request::decode(&bytes).map_err(|e| io::Error::other(e.to_string()))?;
                ledger.record(ego, received.payload_len());
            }
            (comm, utilities)
        }
        SelectionStrategy::Random => {
            let comm = select_random_scope(&scope, config.n_c, selection_rng);
            for &member in &comm.members {
                let perception = perceive(member, detector_rng);
                member_perception.insert(member, perception);
            }
            (comm, BTreeMap::new())
        }
    };

    // Round 2: each selected vehicle encodes and transmits its point
    // features. The fused set used by the driving policy extends the ego's
    // detections with the senders' detections in the ego frame.
    let ego_pos = world.vehicle(ego).expect("ego exists").position();
    let mut fused = ego_dets.detections.clone();
    for &member in &comm_scope.members {
        let (cloud, dets) = member_perception
            .get(&member)
            .expect("selected member was perceived");
        let msg = encode_point_features(cloud, member, tick);
        let bytes = transport.deliver(member, ego, &msg.encode())?;
        let received =
            Round2Message::decode(&bytes).map_err(|e| io::Error::other(e.to_string()))?;
        ledger.record(member, received.payload_len());

        let member_pos = world
            .vehicle(member)
            .expect("scope member exists")
            .position();
        for det in &dets.detections {
            let shifted = Detection {
                x: det.x + member_pos.0 - ego_pos.0,
                y: det.y + member_pos.1 - ego_pos.1,
                ..*det
            };
            // Senders legitimately detect the ego; it must not enter the
            // ego's own obstacle set.
            if shifted.x.powi(2) + shifted.y.powi(2) <= SELF_FILTER_RADIUS * SELF_FILTER_RADIUS {
                continue;
            }
            let duplicate = fused.iter().any(|f| {
                let d2 = (f.x - shifted.x).powi(2) + (f.y - shifted.y).powi(2);
                d2 <= MISS_DISTANCE * MISS_DISTANCE
            });
            if !duplicate {
                fused.push(shifted);
            }
        }
    }

    Ok(ExchangeOutput {
        selection_scope: scope,
        comm_scope,
        fused: DetectionList {
            detections: fused,
            source_id: ego,
            tick: world.tick,
        },
        utilities,
    })
}

/// Builds the deterministic round-2 payload for a vehicle's cloud: 128 key
/// points picked by farthest-point sampling, each carrying a local voxel
/// occupancy histogram (5x5x5 neighborhood, zero-padded to 128 dims) plus
/// its sensor-relative position.
pub fn encode_point_features(cloud: &PointCloud, source: VehicleId, tick: u32) -> Round2Message {
    let grid = voxelize(cloud);
    let real = cloud.real_points();
    let indices = if real.is_empty() {
        vec![]
    } else {
        let mut picked = lidar::farthest_point_indices(real, KEYPOINT_COUNT, 0);
        // Short clouds repeat points to keep the payload shape fixed.
        let mut cursor = 0;
        while picked.len() < KEYPOINT_COUNT {
            picked.push(picked[cursor % picked.len()]);
            cursor += 1;
        }
        picked
    };

    let keypoints: Vec<Keypoint> = if indices.is_empty() {
        (0..KEYPOINT_COUNT)
            .map(|_| Keypoint {
                feature: vec![0.0; FEATURE_DIMS],
                position: [0.0, 0.0, 0.0],
            })
            .collect()
    } else {
        indices
            .iter()
            .map(|&i| {
                let p = real[i];
                let mut feature = vec![0.0f32; FEATURE_DIMS];
                if let Some((cx, cy, cz)) = perception::voxel_index(p) {
                    let mut slot = 0;
                    for dx in -2i64..=2 {
                        for dy in -2i64..=2 {
                            for dz in -2i64..=2 {
                                let (ix, iy, iz) =
                                    (cx as i64 + dx, cy as i64 + dy, cz as i64 + dz);
                                if ix >= 0 && iy >= 0 && iz >= 0 {
                                    feature[slot] = grid.is_occupied(
                                        ix as usize,
                                        iy as usize,
                                        iz as usize,
                                    ) as u8 as f32;
                                }
                                slot += 1;
                            }
                        }
                    }
                }
                Keypoint {
                    feature,
                    position: [p[0] as f32, p[1] as f32, p[2] as f32],
                }
            })
            .collect()
    };

    Round2Message {
        source_id: source,
        tick,
        keypoints,
    }
}
