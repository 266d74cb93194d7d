use coopsim_core::episode::*;
use coopsim_core::lidar::{scan, LidarConfig};
use coopsim_core::protocol::InprocTransport;
use coopsim_core::scenarios::*;
use std::time::Instant;

fn main() {
    let config = ScenarioConfig::from_index(ScenarioFamily::RedLightViolation, 13, 0);
    let scenario = build_world(&config).unwrap();
    let lidar = LidarConfig::default();

    // raw hit counts per vehicle
    for id in [0u32, 2, 3, 4, 5, 6, 7] {
        if scenario.world.vehicle(id).is_none() { continue; }
        let t = Instant::now();
        let cloud = scan(&scenario.world, id, &lidar, 0);
        println!("scan v{id}: hits={} in {:?}", cloud.hits(), t.elapsed());
    }

    for strategy in [Strategy::NoComm, Strategy::Random, Strategy::Selective, Strategy::Oracle] {
        let t = Instant::now();
        let r = run_episode(&scenario, strategy, &EpisodeParams::default(), &mut InprocTransport, None, false).unwrap();
        println!("{}: {:?} {:.1}s sim, wall {:?}", strategy.name(), r.outcome.status, r.outcome.completion_time, t.elapsed());
    }
}
