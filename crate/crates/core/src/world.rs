//! Fixed-timestep world model: vehicle kinematics, traffic lights, collision
//! detection against the ego, and episode termination.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, OrientedBox, Pose2D};
use crate::protocol::BandwidthReport;

/// Simulation timestep, one communication frame per tick at 10 Hz.
pub const DT: f64 = 0.1;
/// Peak acceleration applied at full throttle.
pub const MAX_ACCEL: f64 = 3.0;
/// Peak deceleration applied at full brake.
pub const MAX_DECEL: f64 = 6.0;
/// Front-wheel steering limit, 35 degrees.
pub const MAX_STEER_ANGLE: f64 = 35.0 * std::f64::consts::PI / 180.0;
/// Kinematic bicycle wheelbase.
pub const WHEELBASE: f64 = 2.8;
/// Default episode time limit in seconds.
pub const DEFAULT_TIME_LIMIT: f64 = 60.0;

/// Ids at or above this value denote static obstacles in collision reports:
/// static obstacle `i` is reported as `STATIC_OBSTACLE_ID_BASE + i`.
pub const STATIC_OBSTACLE_ID_BASE: u32 = 1 << 24;

pub type VehicleId = u32;

/// Normalized driving command. All fields are clamped on construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub throttle: f64,
    pub brake: f64,
    pub steer: f64,
}

impl ControlSignal {
    pub fn new(throttle: f64, brake: f64, steer: f64) -> Self {
        Self {
            throttle: throttle.clamp(0.0, 1.0),
            brake: brake.clamp(0.0, 1.0),
            steer: steer.clamp(-1.0, 1.0),
        }
    }

    pub fn coast() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn full_brake() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleRole {
    Ego,
    Occluder,
    Collider,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: VehicleId,
    pub box_: OrientedBox,
    pub speed: f64,
    pub yaw_rate: f64,
    pub role: VehicleRole,
    pub comm_capable: bool,
}

impl VehicleState {
    pub fn pose(&self) -> Pose2D {
        self.box_.center
    }

    pub fn position(&self) -> (f64, f64) {
        (self.box_.center.x, self.box_.center.y)
    }
}

/// Signal phase of the single synthetic intersection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LightPhase {
    NorthSouthGreen,
    EastWestGreen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficLight {
    pub intersection: u32,
    pub phase: LightPhase,
    pub phase_timer: f64,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub dt: f64,
    pub vehicles: Vec<VehicleState>,
    pub static_obstacles: Vec<OrientedBox>,
    pub lights: Vec<TrafficLight>,
}

impl WorldState {
    pub fn elapsed(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn vehicle(&self, id: VehicleId) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.id == id)
    }

    pub fn ego(&self) -> &VehicleState {
        self.vehicles
            .iter()
            .find(|v| v.role == VehicleRole::Ego)
            .expect("world has exactly one ego vehicle")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeStatus {
    Success,
    Collision,
    Stagnation,
}

/// Terminal record of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub status: OutcomeStatus,
    pub completion_time: f64,
    pub ticks: u64,
    pub bandwidth_report: BandwidthReport,
}

/// Circular goal region on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: Pose2D,
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center.x).powi(2) + (y - self.center.y).powi(2) <= self.radius * self.radius
    }
}

/// Advances every vehicle one tick under the kinematic bicycle model and
/// steps the traffic-light timers.
///
/// Position and heading integrate with the pre-update speed; speed then
/// updates from the clamped throttle/brake acceleration and never goes
/// negative. Vehicles without an entry in `controls` coast.
pub fn step(world: &WorldState, controls: &HashMap<VehicleId, ControlSignal>) -> WorldState {
    let mut next = world.clone();
    for v in &mut next.vehicles {
        let ctrl = controls
            .get(&v.id)
            .copied()
            .unwrap_or_else(ControlSignal::coast);
        let ctrl = ControlSignal::new(ctrl.throttle, ctrl.brake, ctrl.steer);
        let steer_angle = ctrl.steer * MAX_STEER_ANGLE;
        let yaw_rate = v.speed / WHEELBASE * steer_angle.tan();

        let pose = v.box_.center;
        let (cos_h, sin_h) = pose.direction();
        v.box_.center = Pose2D::new(
            pose.x + v.speed * cos_h * world.dt,
            pose.y + v.speed * sin_h * world.dt,
            normalize_angle(pose.heading + yaw_rate * world.dt),
        );
        let accel = MAX_ACCEL * ctrl.throttle - MAX_DECEL * ctrl.brake;
        v.speed = (v.speed + accel * world.dt).max(0.0);
        v.yaw_rate = yaw_rate;
    }
    for light in &mut next.lights {
        light.phase_timer += world.dt;
        if light.phase_timer >= light.period {
            light.phase_timer -= light.period;
            light.phase = match light.phase {
                LightPhase::NorthSouthGreen => LightPhase::EastWestGreen,
                LightPhase::EastWestGreen => LightPhase::NorthSouthGreen,
            };
        }
    }
    next.tick += 1;
    next
}

/// Separating-axis collision check between the ego and everything else.
///
/// Vehicles are scanned in ascending id order, then static obstacles in
/// index order, so the first reported pair does not depend on list order.
/// The pair is (ego id, other id); statics use [`STATIC_OBSTACLE_ID_BASE`].
pub fn check_collision(world: &WorldState) -> Option<(VehicleId, VehicleId)> {
    let ego = world.ego();
    let mut others: Vec<&VehicleState> = world
        .vehicles
        .iter()
        .filter(|v| v.id != ego.id)
        .collect();
    others.sort_by_key(|v| v.id);
    for other in others {
        if ego.box_.overlaps(&other.box_) {
            return Some((ego.id, other.id));
        }
    }
    for (i, obs) in world.static_obstacles.iter().enumerate() {
        if ego.box_.overlaps(obs) {
            return Some((ego.id, STATIC_OBSTACLE_ID_BASE + i as u32));
        }
    }
    None
}

/// Tests the episode-termination conditions after a step.
///
/// Collision takes precedence over success on a shared tick; stagnation
/// fires when the time limit is reached without either.
pub fn classify_outcome(
    world: &WorldState,
    goal: &GoalRegion,
    time_limit: f64,
    bandwidth_report: BandwidthReport,
) -> Option<EpisodeOutcome> {
    let elapsed = world.elapsed();
    let ego = world.ego();
    let status = if check_collision(world).is_some() {
        Some(OutcomeStatus::Collision)
    } else if goal.contains(ego.box_.center.x, ego.box_.center.y) {
        Some(OutcomeStatus::Success)
    } else if elapsed >= time_limit {
        Some(OutcomeStatus::Stagnation)
    } else {
        None
    };
    status.map(|status| EpisodeOutcome {
        status,
        completion_time: elapsed,
        ticks: world.tick,
        bandwidth_report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn car(id: VehicleId, x: f64, y: f64, heading: f64, role: VehicleRole) -> VehicleState {
        VehicleState {
            id,
            box_: OrientedBox::new(Pose2D::new(x, y, heading), 4.6, 1.9, 1.6),
            speed: 0.0,
            yaw_rate: 0.0,
            role,
            comm_capable: role != VehicleRole::Collider,
        }
    }

    fn world_with(vehicles: Vec<VehicleState>) -> WorldState {
        WorldState {
            tick: 0,
            dt: DT,
            vehicles,
            static_obstacles: vec![],
            lights: vec![],
        }
    }

    #[test]
    fn stationary_vehicle_stays_put() {
        let w = world_with(vec![car(0, 5.0, 5.0, 1.0, VehicleRole::Ego)]);
        let next = step(&w, &HashMap::new());
        assert_eq!(next.vehicles[0].box_.center, w.vehicles[0].box_.center);
        assert_eq!(next.tick, 1);
    }

    #[test]
    fn straight_line_advance() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.vehicles[0].speed = 10.0;
        let next = step(&w, &HashMap::new());
        assert!((next.vehicles[0].box_.center.x - 1.0).abs() < 1e-12);
        assert!((next.vehicles[0].box_.center.y).abs() < 1e-12);
    }

    #[test]
    fn full_brake_decelerates_at_limit() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.vehicles[0].speed = 5.0;
        let mut controls = HashMap::new();
        controls.insert(0, ControlSignal::full_brake());
        let next = step(&w, &controls);
        assert!((next.vehicles[0].speed - 4.4).abs() < 1e-12);
    }

    #[test]
    fn speed_never_negative() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.vehicles[0].speed = 0.3;
        let mut controls = HashMap::new();
        controls.insert(0, ControlSignal::full_brake());
        let next = step(&w, &controls);
        assert_eq!(next.vehicles[0].speed, 0.0);
    }

    #[test]
    fn collision_pair_ordering_is_list_order_independent() {
        let mut a = world_with(vec![
            car(0, 0.0, 0.0, 0.0, VehicleRole::Ego),
            car(7, 1.0, 0.0, 0.0, VehicleRole::Background),
            car(3, 1.2, 0.0, 0.0, VehicleRole::Background),
        ]);
        let pair_a = check_collision(&a).unwrap();
        a.vehicles.swap(1, 2);
        let pair_b = check_collision(&a).unwrap();
        assert_eq!(pair_a, pair_b);
        assert_eq!(pair_a, (0, 3));
    }

    #[test]
    fn no_collision_when_far_apart() {
        let w = world_with(vec![
            car(0, 0.0, 0.0, 0.0, VehicleRole::Ego),
            car(1, 100.0, 0.0, 0.0, VehicleRole::Background),
        ]);
        assert!(check_collision(&w).is_none());
    }

    #[test]
    fn collision_with_static_obstacle_uses_id_base() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.static_obstacles
            .push(OrientedBox::new(Pose2D::new(1.0, 0.0, 0.0), 4.0, 2.0, 3.5));
        assert_eq!(check_collision(&w), Some((0, STATIC_OBSTACLE_ID_BASE)));
    }

    #[test]
    fn outcome_precedence_and_stagnation() {
        let goal = GoalRegion {
            center: Pose2D::new(0.0, 0.0, 0.0),
            radius: 2.0,
        };
        // Ego inside goal radius and overlapping another vehicle: collision wins.
        let w = world_with(vec![
            car(0, 0.0, 0.0, 0.0, VehicleRole::Ego),
            car(1, 1.0, 0.0, 0.0, VehicleRole::Collider),
        ]);
        let out = classify_outcome(&w, &goal, 60.0, BandwidthReport::default()).unwrap();
        assert_eq!(out.status, OutcomeStatus::Collision);

        // Ego alone at the goal: success.
        let w = world_with(vec![car(0, 0.5, 0.0, 0.0, VehicleRole::Ego)]);
        let out = classify_outcome(&w, &goal, 60.0, BandwidthReport::default()).unwrap();
        assert_eq!(out.status, OutcomeStatus::Success);

        // Time limit reached short of the goal: stagnation.
        let mut w = world_with(vec![car(0, 50.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.tick = 600;
        let out = classify_outcome(&w, &goal, 60.0, BandwidthReport::default()).unwrap();
        assert_eq!(out.status, OutcomeStatus::Stagnation);
        assert_eq!(out.completion_time, 60.0);

        // Mid-episode, nothing terminal.
        let mut w = world_with(vec![car(0, 50.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.tick = 10;
        assert!(classify_outcome(&w, &goal, 60.0, BandwidthReport::default()).is_none());
    }

    #[test]
    fn heading_normalized_after_step() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 3.1, VehicleRole::Ego)]);
        w.vehicles[0].speed = 10.0;
        let mut controls = HashMap::new();
        controls.insert(0, ControlSignal::new(0.0, 0.0, 1.0));
        let mut cur = w;
        for _ in 0..50 {
            cur = step(&cur, &controls);
            let h = cur.vehicles[0].box_.center.heading;
            assert!(h > -std::f64::consts::PI && h <= std::f64::consts::PI);
        }
    }

    #[test]
    fn light_phase_flips_at_period() {
        let mut w = world_with(vec![car(0, 0.0, 0.0, 0.0, VehicleRole::Ego)]);
        w.lights.push(TrafficLight {
            intersection: 0,
            phase: LightPhase::NorthSouthGreen,
            phase_timer: 0.0,
            period: 0.3,
        });
        let w1 = step(&w, &HashMap::new());
        assert_eq!(w1.lights[0].phase, LightPhase::NorthSouthGreen);
        let w2 = step(&step(&w1, &HashMap::new()), &HashMap::new());
        assert_eq!(w2.lights[0].phase, LightPhase::EastWestGreen);
    }
}
