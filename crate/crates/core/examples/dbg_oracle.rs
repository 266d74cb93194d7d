use coopsim_core::episode::*;
use coopsim_core::policy::OraclePolicy;
use coopsim_core::scenarios::*;
use coopsim_core::world::*;
use std::collections::HashMap;

fn main() {
    let config = ScenarioConfig::from_index(ScenarioFamily::RedLightViolation, 13, 0);
    let scenario = build_world(&config).unwrap();
    let mut world = scenario.world.clone();
    let mut oracle = OraclePolicy::new(scenario.goal);
    for i in 0..600u64 {
        let ctrl = oracle.control(&world);
        let mut controls = npc_controls(&world, &scenario);
        controls.insert(scenario.ego_id, ctrl);
        world = step(&world, &controls);
        if i % 50 == 0 {
            let ego = world.ego();
            println!(
                "t={:5.1} ego=({:6.2},{:6.2}) h={:5.2} v={:4.2} ctrl=thr{:.2}/brk{:.2}/st{:+.2}",
                world.elapsed(), ego.box_.center.x, ego.box_.center.y, ego.box_.center.heading, ego.speed,
                ctrl.throttle, ctrl.brake, ctrl.steer
            );
        }
        if let Some(o) = classify_outcome(&world, &scenario.goal, 60.0, Default::default()) {
            println!("outcome {:?} at {:.1}", o.status, o.completion_time);
            break;
        }
    }
}
