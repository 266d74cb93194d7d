//! Generators for the three occlusion-driven pre-crash scenario families.
//!
//! The synthetic map is a single intersection of a north-south and an
//! east-west road (lane centers 1.75 m from the road centerline, right-hand
//! traffic) plus shoulder parking. Each family stages the same cast: the
//! ego, a static or stopped yellow truck that blocks the ego's line of
//! sight, a non-communicating collider on a crossing trajectory, and
//! background traffic. A witness vehicle with clear line of sight to the
//! collider is always placed inside the ego's near communication pool.
//!
//! Construction is certified: the ego's scan at t = 0 must contain zero
//! collider returns while the witness's scan sees it, otherwise the builder
//! reports a geometry error.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{OrientedBox, Pose2D};
use crate::lidar::{scan, LidarConfig, SurfaceId};
use crate::world::{
    ControlSignal, LightPhase, TrafficLight, VehicleId, VehicleRole, VehicleState, WorldState, DT,
};

pub const CAR_LENGTH: f64 = 4.6;
pub const CAR_WIDTH: f64 = 1.9;
pub const CAR_HEIGHT: f64 = 1.6;
pub const TRUCK_LENGTH: f64 = 9.0;
pub const TRUCK_WIDTH: f64 = 2.6;
pub const TRUCK_HEIGHT: f64 = 3.5;

/// Lane center offset from the road centerline.
pub const LANE_OFFSET: f64 = 1.75;
/// Half-extent of the intersection box.
pub const INTERSECTION_HALF: f64 = 7.0;

pub const COLLIDER_SPEEDS: [f64; 3] = [6.0, 8.0, 10.0];
pub const COLLIDER_DISTANCES: [f64; 3] = [25.0, 35.0, 45.0];
pub const EGO_TARGET_SPEEDS: [f64; 3] = [5.0, 7.0, 9.0];
/// Configurations per family: the full 3 x 3 x 3 attribute lattice.
pub const CONFIGS_PER_FAMILY: usize = 27;

pub const EGO_ID: VehicleId = 0;
pub const COLLIDER_ID: VehicleId = 1;
pub const TRUCK_ID: VehicleId = 2;
pub const WITNESS_ID: VehicleId = 3;
const FIRST_EXTRA_ID: VehicleId = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioFamily {
    Overtaking,
    LeftTurn,
    RedLightViolation,
}

impl ScenarioFamily {
    pub const ALL: [ScenarioFamily; 3] = [
        ScenarioFamily::Overtaking,
        ScenarioFamily::LeftTurn,
        ScenarioFamily::RedLightViolation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioFamily::Overtaking => "overtaking",
            ScenarioFamily::LeftTurn => "left_turn",
            ScenarioFamily::RedLightViolation => "red_light_violation",
        }
    }
}

/// One point of the per-family attribute lattice plus the background seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub family: ScenarioFamily,
    pub config_index: usize,
    pub seed: u64,
    /// Collider start distance along its approach, meters.
    pub collider_offset: f64,
    /// Collider cruise speed, m/s.
    pub collider_speed: f64,
    /// Pose of the occluding truck.
    pub truck_pose: Pose2D,
    /// Total background vehicles (witness and parked fillers included).
    pub background_count: usize,
}

impl ScenarioConfig {
    /// Builds the lattice point for `config_index` in 0..27: the index
    /// decomposes into (collider speed, collider distance, ego speed).
    pub fn from_index(family: ScenarioFamily, config_index: usize, seed: u64) -> Self {
        assert!(config_index < CONFIGS_PER_FAMILY);
        let collider_speed = COLLIDER_SPEEDS[config_index / 9];
        let collider_offset = COLLIDER_DISTANCES[(config_index / 3) % 3];
        Self {
            family,
            config_index,
            seed,
            collider_offset,
            collider_speed,
            truck_pose: default_truck_pose(family, collider_offset),
            background_count: 30,
        }
    }

    pub fn ego_target_speed(&self) -> f64 {
        EGO_TARGET_SPEEDS[self.config_index % 3]
    }
}

/// Occluder placement per family. The red-light truck parks on the west
/// shoulder of the ego's approach, centered on the sight line from the ego
/// start to the collider start, so it depends on the collider offset.
pub fn default_truck_pose(family: ScenarioFamily, collider_offset: f64) -> Pose2D {
    match family {
        ScenarioFamily::Overtaking => Pose2D::new(-45.0, -1.0, 0.0),
        ScenarioFamily::LeftTurn => Pose2D::new(-0.7, 7.3, -FRAC_PI_2),
        ScenarioFamily::RedLightViolation => {
            let y = -24.0 + 7.15 * 22.25 / collider_offset;
            Pose2D::new(-5.4, y, FRAC_PI_2)
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("occlusion certificate failed: ego sees {hits} collider points at t = 0")]
    OcclusionCheckFailed { hits: usize },
    #[error("witness certificate failed: only {hits} collider points at t = 0")]
    WitnessCheckFailed { hits: usize },
    #[error("vehicles {0} and {1} overlap at t = 0")]
    InitialOverlap(VehicleId, VehicleId),
}

/// How each non-ego vehicle is driven.
#[derive(Debug, Clone, PartialEq)]
pub enum NpcPlan {
    /// Scripted constant-speed lane holder; ignores traffic lights.
    Collider { speed: f64 },
    /// Lane follower with gap keeping and intersection yielding.
    Background { target_speed: f64, entry_tick: u64 },
    /// Never moves.
    Parked,
}

/// A constructed scenario: the initial world plus everything the episode
/// runner needs to drive it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub world: WorldState,
    pub ego_id: VehicleId,
    pub collider_id: VehicleId,
    pub truck_id: VehicleId,
    pub witness_id: Option<VehicleId>,
    pub route: Vec<(f64, f64)>,
    pub goal: crate::world::GoalRegion,
    pub ego_target_speed: f64,
    pub npc_plans: BTreeMap<VehicleId, NpcPlan>,
}

fn car(id: VehicleId, pose: Pose2D, speed: f64, role: VehicleRole, comm: bool) -> VehicleState {
    VehicleState {
        id,
        box_: OrientedBox::new(pose, CAR_LENGTH, CAR_WIDTH, CAR_HEIGHT),
        speed,
        yaw_rate: 0.0,
        role,
        comm_capable: comm,
    }
}

fn truck(id: VehicleId, pose: Pose2D) -> VehicleState {
    VehicleState {
        id,
        box_: OrientedBox::new(pose, TRUCK_LENGTH, TRUCK_WIDTH, TRUCK_HEIGHT),
        speed: 0.0,
        yaw_rate: 0.0,
        role: VehicleRole::Occluder,
        comm_capable: true,
    }
}

struct FamilyLayout {
    ego_pose: Pose2D,
    route: Vec<(f64, f64)>,
    collider_pose: Pose2D,
    /// Witness pose, cruise speed (0 = parked).
    witness: (Pose2D, f64),
    /// Scripted near-pool background: pose, cruise speed (0 = parked).
    extras: Vec<(Pose2D, f64)>,
    /// Spawn lanes for seeded movers: base pose plus the direction along
    /// the heading (+1 ahead, -1 behind) in which successive vehicles are
    /// staggered. The stagger always points away from the scenario core.
    mover_lanes: Vec<(Pose2D, f64)>,
    statics: Vec<OrientedBox>,
}

fn family_layout(config: &ScenarioConfig) -> FamilyLayout {
    let d = config.collider_offset;
    match config.family {
        // Ego overtakes a parked truck through the oncoming lane; the
        // collider approaches head-on in that lane, hidden by the truck.
        // Ten meters of own-lane runway precede the swing so a warned ego
        // can always stop before leaving its lane.
        ScenarioFamily::Overtaking => FamilyLayout {
            ego_pose: Pose2D::new(-68.0, -LANE_OFFSET, 0.0),
            route: vec![
                (-68.0, -1.75),
                (-58.0, -1.75),
                (-52.0, 2.2),
                (-39.0, 2.2),
                (-33.0, -1.75),
                (-26.0, -1.75),
            ],
            collider_pose: Pose2D::new(-45.0 + d, LANE_OFFSET, PI),
            witness: (Pose2D::new(-35.0, -5.4, 0.0), 0.0),
            extras: vec![
                (Pose2D::new(-74.0, -5.4, 0.0), 0.0),
                (Pose2D::new(-81.0, -5.4, 0.0), 0.0),
                (Pose2D::new(-88.0, -5.4, 0.0), 0.0),
                (Pose2D::new(-96.0, 5.4, 0.0), 0.0),
            ],
            mover_lanes: vec![
                (Pose2D::new(LANE_OFFSET, -40.0, FRAC_PI_2), -1.0),
                (Pose2D::new(-LANE_OFFSET, 40.0, -FRAC_PI_2), -1.0),
                (Pose2D::new(14.0, -LANE_OFFSET, 0.0), 1.0),
                (Pose2D::new(45.0, LANE_OFFSET, PI), -1.0),
            ],
            statics: vec![],
        },
        // Unprotected left turn across oncoming traffic; a truck waiting for
        // its own left turn hides the oncoming collider.
        ScenarioFamily::LeftTurn => FamilyLayout {
            ego_pose: Pose2D::new(LANE_OFFSET, -30.0, FRAC_PI_2),
            route: vec![
                (1.75, -30.0),
                (1.75, -10.0),
                (1.4, -5.0),
                (0.2, -1.8),
                (-2.4, -0.2),
                (-5.5, 1.2),
                (-8.0, 1.75),
                (-24.0, 1.75),
            ],
            collider_pose: Pose2D::new(-LANE_OFFSET, d, -FRAC_PI_2),
            witness: (Pose2D::new(LANE_OFFSET, 14.0, FRAC_PI_2), 5.0),
            extras: vec![
                (Pose2D::new(LANE_OFFSET, -42.0, FRAC_PI_2), 4.5),
                (Pose2D::new(5.4, -33.0, FRAC_PI_2), 0.0),
                (Pose2D::new(5.4, -40.0, FRAC_PI_2), 0.0),
                (Pose2D::new(5.4, -47.0, FRAC_PI_2), 0.0),
            ],
            mover_lanes: vec![
                (Pose2D::new(LANE_OFFSET, 24.0, FRAC_PI_2), 1.0),
                (Pose2D::new(-LANE_OFFSET, 65.0, -FRAC_PI_2), -1.0),
                (Pose2D::new(-70.0, -LANE_OFFSET, 0.0), -1.0),
                (Pose2D::new(55.0, LANE_OFFSET, PI), -1.0),
            ],
            statics: vec![],
        },
        // Ego crosses on green; the collider runs the east-west red behind
        // a truck parked on the shoulder of the ego's approach. A stored
        // container behind the truck keeps the rest of the near pool blind.
        ScenarioFamily::RedLightViolation => {
            let truck_y = config.truck_pose.y;
            FamilyLayout {
                ego_pose: Pose2D::new(LANE_OFFSET, -24.0, FRAC_PI_2),
                route: vec![(1.75, -24.0), (1.75, 22.0)],
                collider_pose: Pose2D::new(LANE_OFFSET - d, -LANE_OFFSET, 0.0),
                witness: (Pose2D::new(-13.0, LANE_OFFSET, PI), 4.5),
                extras: vec![
                    (Pose2D::new(LANE_OFFSET, -34.0, FRAC_PI_2), 4.5),
                    (Pose2D::new(5.4, -26.0, FRAC_PI_2), 0.0),
                    (Pose2D::new(5.4, -33.0, FRAC_PI_2), 0.0),
                    (Pose2D::new(5.4, -40.0, FRAC_PI_2), 0.0),
                ],
                mover_lanes: vec![
                    (Pose2D::new(LANE_OFFSET, 40.0, FRAC_PI_2), 1.0),
                    (Pose2D::new(-LANE_OFFSET, 40.0, -FRAC_PI_2), -1.0),
                    (Pose2D::new(30.0, -LANE_OFFSET, 0.0), 1.0),
                    (Pose2D::new(45.0, LANE_OFFSET, PI), -1.0),
                ],
                statics: vec![
                    // Stored container behind the truck: keeps the rest of
                    // the near pool blind to the collider's approach.
                    OrientedBox::new(
                        Pose2D::new(-5.4, truck_y - 9.5, FRAC_PI_2),
                        TRUCK_LENGTH,
                        TRUCK_WIDTH,
                        3.0,
                    ),
                    // Second container close to the box: hides the final
                    // meters of the approach, so a vehicle without shared
                    // perception has no time left to stop when the collider
                    // emerges.
                    OrientedBox::new(
                        Pose2D::new(-4.8, -9.0, FRAC_PI_2),
                        8.0,
                        TRUCK_WIDTH,
                        3.0,
                    ),
                ],
            }
        }
    }
}

/// Constructs the world for one configuration and certifies its occlusion
/// premise with a scan from the ego (zero collider returns) and from the
/// witness (enough returns to detect).
pub fn build_world(config: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    let layout = family_layout(config);
    let ego_speed = config.ego_target_speed();
    let mut rng = scenario_rng(config);

    let mut vehicles = vec![
        car(EGO_ID, layout.ego_pose, ego_speed, VehicleRole::Ego, true),
        car(
            COLLIDER_ID,
            layout.collider_pose,
            config.collider_speed,
            VehicleRole::Collider,
            false,
        ),
        truck(TRUCK_ID, config.truck_pose),
    ];
    let mut npc_plans: BTreeMap<VehicleId, NpcPlan> = BTreeMap::new();
    npc_plans.insert(
        COLLIDER_ID,
        NpcPlan::Collider {
            speed: config.collider_speed,
        },
    );
    npc_plans.insert(TRUCK_ID, NpcPlan::Parked);

    // The background budget covers the scripted near pool first, then the
    // seeded movers on the spawn lanes.
    let mut witness_id = None;
    let mut next_id = FIRST_EXTRA_ID;
    let mut remaining = config.background_count;
    if remaining > 0 {
        let (pose, speed) = layout.witness;
        vehicles.push(car(WITNESS_ID, pose, speed, VehicleRole::Background, true));
        npc_plans.insert(
            WITNESS_ID,
            if speed > 0.0 {
                NpcPlan::Background {
                    target_speed: speed,
                    entry_tick: 0,
                }
            } else {
                NpcPlan::Parked
            },
        );
        witness_id = Some(WITNESS_ID);
        remaining -= 1;
    }
    for (pose, speed) in &layout.extras {
        if remaining == 0 {
            break;
        }
        vehicles.push(car(next_id, *pose, *speed, VehicleRole::Background, true));
        npc_plans.insert(
            next_id,
            if *speed > 0.0 {
                NpcPlan::Background {
                    target_speed: *speed,
                    entry_tick: 0,
                }
            } else {
                NpcPlan::Parked
            },
        );
        next_id += 1;
        remaining -= 1;
    }
    // Seeded movers, round-robin over the spawn lanes, marching away from
    // the intersection so later vehicles start further out.
    let mut lane_counts = vec![0usize; layout.mover_lanes.len()];
    let mut lane = 0;
    while remaining > 0 {
        let (base, march) = &layout.mover_lanes[lane];
        let slot = lane_counts[lane] as f64;
        let jitter: f64 = rng.gen_range(0.0..6.0);
        let offset = (slot * 14.0 + jitter) * march;
        let (c, s) = base.direction();
        let pose = Pose2D::new(base.x + offset * c, base.y + offset * s, base.heading);
        let target_speed = 4.0 + rng.gen_range(0.0..2.0);
        let entry_tick = rng.gen_range(0..50);
        let speed = if entry_tick == 0 { target_speed } else { 0.0 };
        vehicles.push(car(next_id, pose, speed, VehicleRole::Background, true));
        npc_plans.insert(
            next_id,
            NpcPlan::Background {
                target_speed,
                entry_tick,
            },
        );
        next_id += 1;
        lane_counts[lane] += 1;
        lane = (lane + 1) % layout.mover_lanes.len();
        remaining -= 1;
    }

    let world = WorldState {
        tick: 0,
        dt: DT,
        vehicles,
        static_obstacles: layout.statics,
        lights: vec![TrafficLight {
            intersection: 0,
            phase: LightPhase::NorthSouthGreen,
            phase_timer: 0.0,
            period: 30.0,
        }],
    };

    for (i, a) in world.vehicles.iter().enumerate() {
        for b in world.vehicles.iter().skip(i + 1) {
            if a.box_.overlaps(&b.box_) {
                return Err(ScenarioError::InitialOverlap(a.id, b.id));
            }
        }
    }

    let lidar = LidarConfig::default();
    let collider_hits = |cloud: &crate::lidar::PointCloud| {
        cloud
            .hit_sources
            .iter()
            .filter(|s| **s == SurfaceId::Vehicle(COLLIDER_ID))
            .count()
    };
    let ego_hits = collider_hits(&scan(&world, EGO_ID, &lidar, 0));
    if ego_hits > 0 {
        return Err(ScenarioError::OcclusionCheckFailed { hits: ego_hits });
    }
    if let Some(witness) = witness_id {
        let hits = collider_hits(&scan(&world, witness, &lidar, 0));
        if hits < crate::perception::DetectorConfig::default().hit_min {
            return Err(ScenarioError::WitnessCheckFailed { hits });
        }
    }

    let goal_center = *layout.route.last().unwrap();
    Ok(Scenario {
        config: config.clone(),
        world,
        ego_id: EGO_ID,
        collider_id: COLLIDER_ID,
        truck_id: TRUCK_ID,
        witness_id,
        route: layout.route,
        goal: crate::world::GoalRegion {
            center: Pose2D::new(goal_center.0, goal_center.1, 0.0),
            radius: 2.0,
        },
        ego_target_speed: ego_speed,
        npc_plans,
    })
}

fn scenario_rng(config: &ScenarioConfig) -> ChaCha8Rng {
    let family_salt = match config.family {
        ScenarioFamily::Overtaking => 0x6f76_7254,
        ScenarioFamily::LeftTurn => 0x6c66_7454,
        ScenarioFamily::RedLightViolation => 0x726c_7654,
    };
    let mix = config
        .seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(config.config_index as u64)
        .wrapping_add(family_salt);
    ChaCha8Rng::seed_from_u64(mix)
}

/// Scripted constant-speed lane holding for the collider. It steers
/// nothing, holds its entry heading, and ignores traffic lights entirely.
pub fn collider_policy(vehicle: &VehicleState, _family: ScenarioFamily, speed: f64) -> ControlSignal {
    let (throttle, brake) = crate::policy::speed_control(vehicle.speed, speed);
    ControlSignal::new(throttle, brake, 0.0)
}

/// Controls for every non-ego vehicle at the current tick.
pub fn npc_controls(world: &WorldState, scenario: &Scenario) -> HashMap<VehicleId, ControlSignal> {
    let mut controls = HashMap::new();
    for v in &world.vehicles {
        let Some(plan) = scenario.npc_plans.get(&v.id) else {
            continue;
        };
        let ctrl = match plan {
            NpcPlan::Collider { speed } => collider_policy(v, scenario.config.family, *speed),
            NpcPlan::Parked => ControlSignal::full_brake(),
            NpcPlan::Background {
                target_speed,
                entry_tick,
            } => background_control(world, v, *target_speed, *entry_tick),
        };
        controls.insert(v.id, ctrl);
    }
    controls
}

fn inside_intersection(x: f64, y: f64) -> bool {
    x.abs() < INTERSECTION_HALF && y.abs() < INTERSECTION_HALF
}

fn background_control(
    world: &WorldState,
    v: &VehicleState,
    target_speed: f64,
    entry_tick: u64,
) -> ControlSignal {
    if world.tick < entry_tick {
        return ControlSignal::full_brake();
    }
    let pose = v.pose();
    let (c, s) = pose.direction();

    // Gap keeping against anything ahead in the same corridor.
    for other in &world.vehicles {
        if other.id == v.id {
            continue;
        }
        let dx = other.box_.center.x - pose.x;
        let dy = other.box_.center.y - pose.y;
        let forward = dx * c + dy * s;
        let lateral = (-dx * s + dy * c).abs();
        if lateral < 1.6 && forward > 0.0 && forward < 9.0 + v.speed {
            return ControlSignal::full_brake();
        }
    }

    // Yield at the intersection on red or while the box is occupied.
    if !inside_intersection(pose.x, pose.y) {
        let travels_east_west = c.abs() > s.abs();
        let dist_to_box = if travels_east_west {
            if c > 0.0 {
                -INTERSECTION_HALF - pose.x
            } else {
                pose.x - INTERSECTION_HALF
            }
        } else if s > 0.0 {
            -INTERSECTION_HALF - pose.y
        } else {
            pose.y - INTERSECTION_HALF
        };
        if dist_to_box > 0.0 && dist_to_box < 10.0 {
            let red = world.lights.first().is_some_and(|l| {
                matches!(
                    (travels_east_west, l.phase),
                    (true, LightPhase::NorthSouthGreen) | (false, LightPhase::EastWestGreen)
                )
            });
            // Yield to moving traffic inside the box; a parked or waiting
            // vehicle never holds the intersection closed.
            let occupied = world.vehicles.iter().any(|o| {
                o.id != v.id
                    && o.speed > 0.5
                    && inside_intersection(o.box_.center.x, o.box_.center.y)
            });
            if red || occupied {
                return ControlSignal::full_brake();
            }
        }
    }

    // Hold the lane at the cruise speed; park at the map edge.
    if pose.x.abs() > 100.0 || pose.y.abs() > 100.0 {
        return ControlSignal::full_brake();
    }
    let (throttle, brake) = crate::policy::speed_control(v.speed, target_speed);
    ControlSignal::new(throttle, brake, 0.0)
}
