//! Single-episode simulation loop: perception, communication, policies,
//! world stepping, and termination.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lidar::{scan, LidarConfig};
use crate::perception::{detect, DetectorConfig};
use crate::policy::{CooperativePolicy, OraclePolicy};
use crate::protocol::{
    run_exchange, BandwidthLedger, ExchangeConfig, MessageTransport, SelectionStrategy,
};
use crate::scenarios::{npc_controls, Scenario, CAR_LENGTH, CAR_WIDTH};
use crate::world::{classify_outcome, step, EpisodeOutcome, VehicleId, DEFAULT_TIME_LIMIT};

/// Driving strategy under evaluation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Utility-scored two-round communication.
    Selective,
    /// Random peer sampling, point features only.
    Random,
    /// Ground-truth space-time expert; no communication.
    Oracle,
    /// Ego perception only; lower-bound baseline.
    NoComm,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Selective => "selective",
            Strategy::Random => "random",
            Strategy::Oracle => "oracle",
            Strategy::NoComm => "no_comm",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeParams {
    pub n_s: usize,
    pub n_c: usize,
    pub comm_range: f64,
    pub lidar: LidarConfig,
    pub detector: DetectorConfig,
    pub time_limit: f64,
}

impl Default for EpisodeParams {
    fn default() -> Self {
        Self {
            n_s: 6,
            n_c: 3,
            comm_range: crate::protocol::DEFAULT_COMM_RANGE,
            lidar: LidarConfig::default(),
            detector: DetectorConfig::default(),
            time_limit: DEFAULT_TIME_LIMIT,
        }
    }
}

/// Per-tick protocol trace for plotting.
#[derive(Debug, Clone)]
pub struct TickTrace {
    pub tick: u64,
    pub utilities: BTreeMap<VehicleId, u32>,
    pub selected: Vec<VehicleId>,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub outcome: EpisodeOutcome,
    pub traces: Vec<TickTrace>,
    pub degenerate_scope_ticks: u64,
}

fn stream_seed(scenario: &Scenario, salt: u64) -> u64 {
    let config = &scenario.config;
    let family = match config.family {
        crate::scenarios::ScenarioFamily::Overtaking => 1u64,
        crate::scenarios::ScenarioFamily::LeftTurn => 2,
        crate::scenarios::ScenarioFamily::RedLightViolation => 3,
    };
    config
        .seed
        .wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(family << 32)
        .wrapping_add((config.config_index as u64) << 8)
        .wrapping_add(salt)
}

/// Runs one episode to termination.
///
/// Perception randomness (scan downsampling, detector noise) is seeded from
/// the scenario alone, so every strategy evaluated on the same (config,
/// seed) pair observes identical sensor behavior; only the random baseline
/// consumes the separate selection stream.
pub fn run_episode(
    scenario: &Scenario,
    strategy: Strategy,
    params: &EpisodeParams,
    transport: &mut dyn MessageTransport,
    mut replay: Option<&mut dyn Write>,
    collect_traces: bool,
) -> io::Result<EpisodeResult> {
    let mut world = scenario.world.clone();
    let mut detector_rng = ChaCha8Rng::seed_from_u64(stream_seed(scenario, 0xdec0de));
    let mut selection_rng = ChaCha8Rng::seed_from_u64(stream_seed(scenario, 0x5e1ec7));
    let mut ledger = BandwidthLedger::new();
    let mut oracle = OraclePolicy::new(scenario.goal);
    let mut coop = CooperativePolicy::new(
        scenario.route.clone(),
        scenario.ego_target_speed,
        CAR_LENGTH,
        CAR_WIDTH,
    );
    let exchange_config = ExchangeConfig {
        n_s: params.n_s,
        n_c: params.n_c,
        comm_range: params.comm_range,
        lidar: params.lidar.clone(),
        detector: params.detector.clone(),
    };
    let mut traces = Vec::new();
    let mut degenerate_scope_ticks = 0u64;

    if let Some(w) = replay.as_deref_mut() {
        writeln!(w, "tick,vehicle_id,x,y,heading,speed,role")?;
        write_replay_rows(w, &world)?;
    }

    loop {
        let ego = world.ego();
        let ego_pose = ego.box_.center;
        let ego_speed = ego.speed;
        let tick = world.tick;

        let ego_control = match strategy {
            Strategy::Oracle => oracle.control(&world),
            Strategy::NoComm => {
                let seed = detector_rng.gen::<u64>();
                let cloud = scan(&world, scenario.ego_id, &params.lidar, seed);
                let dets = detect(
                    &world,
                    &cloud,
                    scenario.ego_id,
                    &params.detector,
                    &mut detector_rng,
                );
                coop.control(&ego_pose, ego_speed, tick, world.dt, &dets)
            }
            Strategy::Selective | Strategy::Random => {
                let protocol_strategy = if strategy == Strategy::Selective {
                    SelectionStrategy::Selective
                } else {
                    SelectionStrategy::Random
                };
                let exchange = run_exchange(
                    &world,
                    scenario.ego_id,
                    protocol_strategy,
                    &exchange_config,
                    &mut detector_rng,
                    &mut selection_rng,
                    transport,
                    &mut ledger,
                )?;
                if exchange.selection_scope.degenerate {
                    degenerate_scope_ticks += 1;
                }
                if collect_traces {
                    traces.push(TickTrace {
                        tick,
                        utilities: exchange.utilities.clone(),
                        selected: exchange.comm_scope.members.clone(),
                    });
                }
                coop.control(&ego_pose, ego_speed, tick, world.dt, &exchange.fused)
            }
        };

        let mut controls = npc_controls(&world, scenario);
        controls.insert(scenario.ego_id, ego_control);
        world = step(&world, &controls);

        if let Some(w) = replay.as_deref_mut() {
            write_replay_rows(w, &world)?;
        }

        let report = ledger.report(world.elapsed());
        if let Some(outcome) = classify_outcome(&world, &scenario.goal, params.time_limit, report)
        {
            return Ok(EpisodeResult {
                outcome,
                traces,
                degenerate_scope_ticks,
            });
        }
    }
}

fn write_replay_rows(w: &mut dyn Write, world: &crate::world::WorldState) -> io::Result<()> {
    for v in &world.vehicles {
        writeln!(
            w,
            "{},{},{:.4},{:.4},{:.6},{:.4},{:?}",
            world.tick,
            v.id,
            v.box_.center.x,
            v.box_.center.y,
            v.box_.center.heading,
            v.speed,
            v.role
        )?;
    }
    Ok(())
}
