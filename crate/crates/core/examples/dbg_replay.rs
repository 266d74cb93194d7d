use coopsim_core::episode::*;
use coopsim_core::protocol::InprocTransport;
use coopsim_core::scenarios::*;

fn main() {
    let config = ScenarioConfig::from_index(ScenarioFamily::RedLightViolation, 13, 0);
    let scenario = build_world(&config).unwrap();
    let mut replay = Vec::new();
    let r = run_episode(&scenario, Strategy::Selective, &EpisodeParams::default(), &mut InprocTransport, Some(&mut replay), false).unwrap();
    println!("outcome {:?} at {:.1}", r.outcome.status, r.outcome.completion_time);
    let text = String::from_utf8(replay).unwrap();
    for line in text.lines() {
        let mut f = line.split(',');
        let (tick, id) = (f.next().unwrap(), f.next().unwrap());
        if id == "0" || id == "1" {
            let tick_n: u64 = tick.parse().unwrap_or(0);
            if tick_n % 5 == 0 || tick_n > 33 {
                println!("{line}");
            }
        }
    }
}
