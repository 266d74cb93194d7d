//! Driving policies.
//!
//! [`OraclePolicy`] is the ground-truth expert: it predicts every vehicle
//! by constant-velocity extrapolation, reserves the predictions in a
//! space-time grid, and follows an A* plan through it. It sets the
//! reference completion times and certifies that scenarios are solvable.
//!
//! [`CooperativePolicy`] is perception-limited: it consumes the fused
//! detections produced by the communication exchange, tracks them over
//! time, and follows the scenario route, braking hard whenever a tracked
//! object's extrapolation enters the ego's swept corridor.

mod astar;
mod pursuit;

pub use astar::{plan_astar, Cell, SpaceTimePlan};
pub use pursuit::{follow_route, pure_pursuit_steer, speed_control, Polyline};

use std::collections::VecDeque;

use crate::geometry::{OrientedBox, Pose2D};
use crate::perception::DetectionList;
use crate::world::{ControlSignal, GoalRegion, VehicleState, WorldState};

/// Planner discretization: one meter per cell.
pub const PLAN_RESOLUTION: f64 = 1.0;
/// Planner timestep in seconds.
pub const PLAN_STEP_SECONDS: f64 = 0.5;
/// Planner horizon in timesteps (20 seconds).
pub const PLAN_HORIZON: usize = 40;
/// Obstacle inflation beyond the ego's swept half-width.
pub const PLAN_INFLATION: f64 = 0.5;
/// Half-width of the ego footprint assumed by the point-robot planner.
pub const EGO_HALF_WIDTH: f64 = 0.95;

/// Constant-velocity extrapolation window of the cooperative brake rule.
pub const BRAKE_HORIZON: f64 = 3.0;
/// Nearest-neighbor association gate for the tracker, meters.
pub const ASSOCIATION_GATE: f64 = 2.0;
/// Tracks unseen for this many ticks are dropped.
pub const TRACK_DROP_TICKS: u64 = 10;

/// One tracked object in world coordinates.
#[derive(Debug, Clone)]
pub struct TrackedObject {
    pub position: (f64, f64),
    pub velocity: (f64, f64),
    pub age: u32,
    pub last_seen: u64,
    pub length: f64,
    pub width: f64,
    pub yaw: f64,
    history: VecDeque<(u64, (f64, f64))>,
}

impl TrackedObject {
    fn new(tick: u64, position: (f64, f64), length: f64, width: f64, yaw: f64) -> Self {
        let mut history = VecDeque::with_capacity(9);
        history.push_back((tick, position));
        Self {
            position,
            velocity: (0.0, 0.0),
            age: 1,
            last_seen: tick,
            length,
            width,
            yaw,
            history,
        }
    }

    fn observe(&mut self, tick: u64, dt: f64, position: (f64, f64)) {
        self.history.push_back((tick, position));
        while self.history.len() > 9 {
            self.history.pop_front();
        }
        // Finite difference over the retained window; the longer baseline
        // suppresses detection noise that a single-tick difference would
        // amplify by 1/dt.
        let (t0, p0) = *self.history.front().unwrap();
        let span = (tick - t0) as f64 * dt;
        if span > 1e-9 {
            self.velocity = ((position.0 - p0.0) / span, (position.1 - p0.1) / span);
        }
        self.position = position;
        self.age += 1;
        self.last_seen = tick;
    }

    fn predicted_box(&self, tau: f64, margin: f64) -> OrientedBox {
        let speed = (self.velocity.0.powi(2) + self.velocity.1.powi(2)).sqrt();
        let heading = if speed > 1.0 {
            self.velocity.1.atan2(self.velocity.0)
        } else {
            self.yaw
        };
        OrientedBox::new(
            Pose2D::new(
                self.position.0 + self.velocity.0 * tau,
                self.position.1 + self.velocity.1 * tau,
                heading,
            ),
            self.length + 2.0 * margin,
            self.width + 2.0 * margin,
            1.0,
        )
    }
}

/// Ground-truth expert: constant-velocity reservations plus space-time A*.
#[derive(Debug)]
pub struct OraclePolicy {
    goal: GoalRegion,
    replan_every: u64,
    plan: Option<(SpaceTimePlan, u64)>,
}

impl OraclePolicy {
    pub fn new(goal: GoalRegion) -> Self {
        Self {
            goal,
            // One replan per planner timestep keeps the schedule honest.
            replan_every: (PLAN_STEP_SECONDS / crate::world::DT).round() as u64,
            plan: None,
        }
    }

    pub fn control(&mut self, world: &WorldState) -> ControlSignal {
        let needs_replan = match &self.plan {
            None => true,
            Some((_, tick)) => world.tick.saturating_sub(*tick) >= self.replan_every,
        };
        if needs_replan {
            self.plan = self.replan(world).map(|p| (p, world.tick));
        }
        let Some((plan, plan_tick)) = &self.plan else {
            return ControlSignal::full_brake();
        };
        let ego = world.ego();
        if plan.cells.len() < 2 {
            return ControlSignal::full_brake();
        }

        let path: Vec<(f64, f64)> = dedup_consecutive(
            plan.cells
                .iter()
                .map(|&((cx, cy), _)| (cx as f64 * PLAN_RESOLUTION, cy as f64 * PLAN_RESOLUTION))
                .collect(),
        );
        if path.len() < 2 {
            // Plan waits in place until the goal opens up.
            return ControlSignal::full_brake();
        }
        let route = Polyline::new(path);

        // Desired speed is the plan's own pace over the next second.
        let elapsed = world.tick.saturating_sub(*plan_tick) as f64 * world.dt;
        let step_now = (elapsed / plan.step_seconds).floor() as usize;
        let lookahead_steps = (1.0 / plan.step_seconds).round() as usize;
        let here = plan.cell_at(step_now);
        let there = plan.cell_at(step_now + lookahead_steps);
        let dist = (((there.0 - here.0).pow(2) + (there.1 - here.1).pow(2)) as f64).sqrt()
            * plan.resolution;
        let desired = dist / (lookahead_steps as f64 * plan.step_seconds);

        let steer = pure_pursuit_steer(&ego.box_.center, &route, 2.5);
        let (throttle, brake) = speed_control(ego.speed, desired);
        ControlSignal::new(throttle, brake, steer)
    }

    fn replan(&self, world: &WorldState) -> Option<SpaceTimePlan> {
        let ego = world.ego();
        let inflation = PLAN_INFLATION + EGO_HALF_WIDTH;

        // The horizon must cover the whole remaining route plus room to
        // wait out crossing traffic, otherwise distant goals are
        // unreachable by construction.
        let dx = ((self.goal.center.x - ego.box_.center.x) / PLAN_RESOLUTION).abs();
        let dy = ((self.goal.center.y - ego.box_.center.y) / PLAN_RESOLUTION).abs();
        let horizon = (dx.max(dy).ceil() as usize + 24).max(PLAN_HORIZON).min(120);

        // Reserved footprints per planner timestep.
        let mut reserved: Vec<Vec<OrientedBox>> = Vec::with_capacity(horizon + 1);
        for t in 0..=horizon {
            let tau = t as f64 * PLAN_STEP_SECONDS;
            let mut boxes: Vec<OrientedBox> = world
                .vehicles
                .iter()
                .filter(|v| v.id != ego.id)
                .map(|v| predicted_vehicle_box(v, tau).inflated(inflation))
                .collect();
            boxes.extend(
                world
                    .static_obstacles
                    .iter()
                    .map(|obs| obs.inflated(inflation)),
            );
            reserved.push(boxes);
        }

        let to_cell = |x: f64, y: f64| -> Cell {
            (
                (x / PLAN_RESOLUTION).round() as i32,
                (y / PLAN_RESOLUTION).round() as i32,
            )
        };
        let start = to_cell(ego.box_.center.x, ego.box_.center.y);
        let goal = to_cell(self.goal.center.x, self.goal.center.y);
        let blocked = move |cell: Cell, t: usize| -> bool {
            let x = cell.0 as f64 * PLAN_RESOLUTION;
            let y = cell.1 as f64 * PLAN_RESOLUTION;
            reserved[t.min(horizon)]
                .iter()
                .any(|b| b.contains_point(x, y, 0.0))
        };
        plan_astar(
            start,
            goal,
            &blocked,
            horizon,
            PLAN_RESOLUTION,
            PLAN_STEP_SECONDS,
        )
    }
}

/// Constant-velocity prediction of a vehicle's footprint `tau` seconds out.
pub fn predicted_vehicle_box(v: &VehicleState, tau: f64) -> OrientedBox {
    let pose = v.box_.center;
    let (c, s) = pose.direction();
    OrientedBox::new(
        Pose2D::new(
            pose.x + v.speed * c * tau,
            pose.y + v.speed * s * tau,
            pose.heading,
        ),
        v.box_.length,
        v.box_.width,
        v.box_.height,
    )
}

fn dedup_consecutive(points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for p in points {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    out
}

/// Perception-limited route follower with a swept-corridor brake rule.
#[derive(Debug)]
pub struct CooperativePolicy {
    route: Polyline,
    target_speed: f64,
    ego_length: f64,
    ego_width: f64,
    tracks: Vec<TrackedObject>,
}

impl CooperativePolicy {
    pub fn new(
        route_points: Vec<(f64, f64)>,
        target_speed: f64,
        ego_length: f64,
        ego_width: f64,
    ) -> Self {
        Self {
            route: Polyline::new(route_points),
            target_speed,
            ego_length,
            ego_width,
            tracks: Vec::new(),
        }
    }

    pub fn tracks(&self) -> &[TrackedObject] {
        &self.tracks
    }

    /// One control decision from the fused detection list. `fused` centers
    /// are in the ego frame; the tracker runs in world coordinates.
    pub fn control(
        &mut self,
        ego_pose: &Pose2D,
        ego_speed: f64,
        tick: u64,
        dt: f64,
        fused: &DetectionList,
    ) -> ControlSignal {
        self.update_tracks(ego_pose, tick, dt, fused);

        if self.corridor_threatened(ego_pose, ego_speed) {
            return ControlSignal::full_brake();
        }
        follow_route(ego_pose, ego_speed, &self.route, self.target_speed)
    }

    fn update_tracks(&mut self, ego_pose: &Pose2D, tick: u64, dt: f64, fused: &DetectionList) {
        let mut matched = vec![false; self.tracks.len()];
        for det in &fused.detections {
            let pos = (det.x + ego_pose.x, det.y + ego_pose.y);
            let mut best: Option<(usize, f64)> = None;
            for (i, track) in self.tracks.iter().enumerate() {
                if matched[i] || track.last_seen == tick {
                    continue;
                }
                let d2 = (track.position.0 - pos.0).powi(2) + (track.position.1 - pos.1).powi(2);
                if d2 <= ASSOCIATION_GATE * ASSOCIATION_GATE
                    && best.is_none_or(|(_, bd)| d2 < bd)
                {
                    best = Some((i, d2));
                }
            }
            match best {
                Some((i, _)) => {
                    matched[i] = true;
                    self.tracks[i].observe(tick, dt, pos);
                }
                None => {
                    self.tracks.push(TrackedObject::new(
                        tick,
                        pos,
                        det.length,
                        det.width,
                        det.yaw,
                    ));
                    matched.push(true);
                }
            }
        }
        self.tracks
            .retain(|t| tick.saturating_sub(t.last_seen) <= TRACK_DROP_TICKS);
    }

    fn corridor_threatened(&self, ego_pose: &Pose2D, ego_speed: f64) -> bool {
        if self.tracks.is_empty() {
            return false;
        }
        // The corridor is the road area the ego sweeps over the horizon at
        // the pace it intends to drive. The object and ego lookahead times
        // are deliberately decoupled: racing the ego's schedule against a
        // noisy velocity estimate invites braking exactly late enough to
        // stop inside the conflict, so the ego yields to anything whose
        // extrapolation touches the corridor area at all.
        let corridor_speed = ego_speed.max(0.6 * self.target_speed);
        let s0 = self.route.project((ego_pose.x, ego_pose.y));
        let ego_boxes: Vec<OrientedBox> = (0..=10)
            .map(|i| {
                let s = s0 + corridor_speed * BRAKE_HORIZON * i as f64 / 10.0;
                let center = self.route.point_at(s);
                let heading = self.route.tangent_at(s);
                OrientedBox::new(
                    Pose2D::new(center.0, center.1, heading),
                    self.ego_length,
                    self.ego_width,
                    1.0,
                )
            })
            .collect();
        let mut tau = 0.0;
        while tau <= BRAKE_HORIZON + 1e-9 {
            // Track-position jitter compounds through the velocity estimate,
            // so the clearance margin widens with lookahead time.
            let margin = 0.2 + 0.2 * tau;
            for track in &self.tracks {
                let predicted = track.predicted_box(tau, margin);
                if ego_boxes.iter().any(|b| b.overlaps(&predicted)) {
                    return true;
                }
            }
            tau += 0.2;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::Detection;

    fn det(x: f64, y: f64) -> Detection {
        Detection {
            x,
            y,
            z: 0.8,
            length: 4.6,
            width: 1.9,
            height: 1.6,
            yaw: 0.0,
            score: 1.0,
        }
    }

    fn fused(dets: Vec<Detection>, tick: u64) -> DetectionList {
        DetectionList {
            detections: dets,
            source_id: 0,
            tick,
        }
    }

    #[test]
    fn no_detections_means_route_following() {
        let mut policy = CooperativePolicy::new(vec![(0.0, 0.0), (100.0, 0.0)], 7.0, 4.6, 1.9);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let ctrl = policy.control(&pose, 3.0, 0, 0.1, &fused(vec![], 0));
        assert!(ctrl.throttle > 0.0);
        assert_eq!(ctrl.brake, 0.0);
    }

    #[test]
    fn head_on_track_triggers_full_brake() {
        let mut policy = CooperativePolicy::new(vec![(0.0, 0.0), (100.0, 0.0)], 7.0, 4.6, 1.9);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        // Build a track with two observations: object ahead closing at 10 m/s.
        policy.control(&pose, 5.0, 0, 0.1, &fused(vec![det(25.0, 0.0)], 0));
        let ctrl = policy.control(&pose, 5.0, 1, 0.1, &fused(vec![det(24.0, 0.0)], 1));
        assert_eq!(ctrl.brake, 1.0);
        assert_eq!(ctrl.throttle, 0.0);
        let track = &policy.tracks()[0];
        assert!(track.velocity.0 < -5.0);
    }

    #[test]
    fn crossing_object_out_of_corridor_is_ignored() {
        let mut policy = CooperativePolicy::new(vec![(0.0, 0.0), (100.0, 0.0)], 7.0, 4.6, 1.9);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        // Static object well off the route.
        policy.control(&pose, 5.0, 0, 0.1, &fused(vec![det(20.0, 8.0)], 0));
        let ctrl = policy.control(&pose, 5.0, 1, 0.1, &fused(vec![det(20.0, 8.0)], 1));
        assert_eq!(ctrl.brake, 0.0);
    }

    #[test]
    fn stale_tracks_are_dropped() {
        let mut policy = CooperativePolicy::new(vec![(0.0, 0.0), (100.0, 0.0)], 7.0, 4.6, 1.9);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        policy.control(&pose, 5.0, 0, 0.1, &fused(vec![det(50.0, 20.0)], 0));
        assert_eq!(policy.tracks().len(), 1);
        for tick in 1..=TRACK_DROP_TICKS + 1 {
            policy.control(&pose, 5.0, tick, 0.1, &fused(vec![], tick));
        }
        assert!(policy.tracks().is_empty());
    }

    #[test]
    fn association_gate_splits_tracks() {
        let mut policy = CooperativePolicy::new(vec![(0.0, 0.0), (100.0, 0.0)], 7.0, 4.6, 1.9);
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        policy.control(&pose, 5.0, 0, 0.1, &fused(vec![det(50.0, 20.0)], 0));
        // Second detection 5 m away exceeds the 2 m gate: new track.
        policy.control(&pose, 5.0, 1, 0.1, &fused(vec![det(55.0, 20.0)], 1));
        assert_eq!(policy.tracks().len(), 2);
    }
}
