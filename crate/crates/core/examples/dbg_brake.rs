use coopsim_core::episode::*;
use coopsim_core::perception::DetectionList;
use coopsim_core::policy::CooperativePolicy;
use coopsim_core::protocol::*;
use coopsim_core::scenarios::*;
use coopsim_core::world::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

fn main() {
    let config = ScenarioConfig::from_index(ScenarioFamily::RedLightViolation, 13, 0);
    let scenario = build_world(&config).unwrap();
    let mut world = scenario.world.clone();
    let mut det_rng = ChaCha8Rng::seed_from_u64(1);
    let mut sel_rng = ChaCha8Rng::seed_from_u64(2);
    let mut ledger = BandwidthLedger::new();
    let mut coop = CooperativePolicy::new(scenario.route.clone(), scenario.ego_target_speed, CAR_LENGTH, CAR_WIDTH);
    let cfg = ExchangeConfig::default();
    for i in 0..400u64 {
        let ego = world.ego().clone();
        let ex = run_exchange(&world, 0, SelectionStrategy::Selective, &cfg, &mut det_rng, &mut sel_rng, &mut InprocTransport, &mut ledger).unwrap();
        let ctrl = coop.control(&ego.box_.center, ego.speed, world.tick, world.dt, &ex.fused);
        if i % 5 == 0 {
            println!("t={:5.1} ego=({:6.2},{:6.2}) v={:4.2} brake={} tracks={}", world.elapsed(), ego.box_.center.x, ego.box_.center.y, ego.speed, ctrl.brake, coop.tracks().len());
            if ctrl.brake > 0.5 {
                for tr in coop.tracks() {
                    let d = ((tr.position.0-ego.box_.center.x).powi(2)+(tr.position.1-ego.box_.center.y).powi(2)).sqrt();
                    if d < 40.0 {
                        println!("    track pos=({:6.2},{:6.2}) vel=({:5.2},{:5.2}) age={} d={:.1}", tr.position.0, tr.position.1, tr.velocity.0, tr.velocity.1, tr.age, d);
                    }
                }
            }
        }
        let mut controls: HashMap<u32, ControlSignal> = npc_controls(&world, &scenario);
        controls.insert(0, ctrl);
        world = step(&world, &controls);
        if let Some(o) = classify_outcome(&world, &scenario.goal, 60.0, Default::default()) {
            println!("outcome {:?} at {:.1}", o.status, o.completion_time);
            break;
        }
    }
}
