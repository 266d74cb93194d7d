use coopsim_core::episode::*;
use coopsim_core::protocol::InprocTransport;
use coopsim_core::scenarios::*;
use coopsim_core::world::*;
use std::collections::HashMap;
use coopsim_core::policy::OraclePolicy;
use coopsim_core::policy::CooperativePolicy;
use coopsim_core::protocol::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Re-run an episode step by step and report the collision pair and poses.
fn forensic(family: ScenarioFamily, idx: usize, seed: u64, strategy: Strategy) {
    let config = ScenarioConfig::from_index(family, idx, seed);
    let scenario = build_world(&config).unwrap();
    let mut world = scenario.world.clone();
    let mut oracle = OraclePolicy::new(scenario.goal);
    let mut coop = CooperativePolicy::new(scenario.route.clone(), scenario.ego_target_speed, CAR_LENGTH, CAR_WIDTH);
    // Mirror run_episode's stream seeding so failures reproduce exactly.
    let fam_salt: u64 = match family {
        ScenarioFamily::Overtaking => 1,
        ScenarioFamily::LeftTurn => 2,
        ScenarioFamily::RedLightViolation => 3,
    };
    let stream = |salt: u64| {
        seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(fam_salt << 32)
            .wrapping_add((idx as u64) << 8)
            .wrapping_add(salt)
    };
    let mut det_rng = ChaCha8Rng::seed_from_u64(stream(0xdec0de));
    let mut sel_rng = ChaCha8Rng::seed_from_u64(stream(0x5e1ec7));
    let mut ledger = BandwidthLedger::new();
    let cfg = ExchangeConfig::default();
    for _ in 0..600 {
        let ego = world.ego().clone();
        let ctrl = match strategy {
            Strategy::Oracle => oracle.control(&world),
            Strategy::NoComm => {
                let s = det_rng.gen::<u64>();
                let cloud = coopsim_core::lidar::scan(&world, 0, &cfg.lidar, s);
                let dets = coopsim_core::perception::detect(&world, &cloud, 0, &cfg.detector, &mut det_rng);
                coop.control(&ego.box_.center, ego.speed, world.tick, world.dt, &dets)
            }
            _ => {
                let st = if strategy == Strategy::Selective { SelectionStrategy::Selective } else { SelectionStrategy::Random };
                let ex = run_exchange(&world, 0, st, &cfg, &mut det_rng, &mut sel_rng, &mut InprocTransport, &mut ledger).unwrap();
                coop.control(&ego.box_.center, ego.speed, world.tick, world.dt, &ex.fused)
            }
        };
        let mut controls: HashMap<u32, ControlSignal> = npc_controls(&world, &scenario);
        controls.insert(0, ctrl);
        world = step(&world, &controls);
        if let Some((a, b)) = check_collision(&world) {
            let ego = world.ego();
            let other = world.vehicle(b);
            println!(
                "{} cfg{} seed{} {}: collision ego<->{} at t={:.1} ego=({:.1},{:.1} h={:.2} v={:.1}) other={:?}",
                family.name(), idx, seed, strategy.name(), b, world.elapsed(),
                ego.box_.center.x, ego.box_.center.y, ego.box_.center.heading, ego.speed,
                other.map(|o| (o.role, (o.box_.center.x*10.0).round()/10.0, (o.box_.center.y*10.0).round()/10.0, (o.speed*10.0).round()/10.0)),
            );
            return;
        }
        if scenario.goal.contains(world.ego().box_.center.x, world.ego().box_.center.y) {
            println!("{} cfg{} seed{} {}: success t={:.1}", family.name(), idx, seed, strategy.name(), world.elapsed());
            return;
        }
        if world.elapsed() >= 60.0 {
            let ego = world.ego();
            println!("{} cfg{} seed{} {}: stagnation; ego at ({:.1},{:.1}) v={:.1}", family.name(), idx, seed, strategy.name(), ego.box_.center.x, ego.box_.center.y, ego.speed);
            return;
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let family = match args.get(1).map(|s| s.as_str()) {
        Some("left_turn") => ScenarioFamily::LeftTurn,
        Some("red_light") => ScenarioFamily::RedLightViolation,
        _ => ScenarioFamily::Overtaking,
    };
    let strategy = match args.get(2).map(|s| s.as_str()) {
        Some("oracle") => Strategy::Oracle,
        Some("random") => Strategy::Random,
        Some("no_comm") => Strategy::NoComm,
        _ => Strategy::Selective,
    };
    for idx in 0..CONFIGS_PER_FAMILY {
        for seed in 0..3 {
            forensic(family, idx, seed, strategy);
        }
    }
}
