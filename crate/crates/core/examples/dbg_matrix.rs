use coopsim_core::episode::*;
use coopsim_core::protocol::InprocTransport;
use coopsim_core::scenarios::*;
use coopsim_core::world::OutcomeStatus;
use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let params = EpisodeParams::default();
    let mut jobs = Vec::new();
    for family in ScenarioFamily::ALL {
        for idx in 0..CONFIGS_PER_FAMILY {
            for seed in 0..3u64 {
                jobs.push((family, idx, seed));
            }
        }
    }
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(family, idx, seed)| {
            let config = ScenarioConfig::from_index(family, idx, seed);
            let scenario = build_world(&config).unwrap();
            let mut out = Vec::new();
            for strategy in [Strategy::Oracle, Strategy::Selective, Strategy::Random, Strategy::NoComm] {
                let r = run_episode(&scenario, strategy, &params, &mut InprocTransport, None, false).unwrap();
                out.push((family, idx, seed, strategy, r.outcome.status, r.outcome.completion_time));
            }
            out
        })
        .collect();
    let mut counts = std::collections::BTreeMap::<(String, &str), (usize, usize, usize)>::new();
    for row in results.iter().flatten() {
        let e = counts.entry((format!("{:?}", row.0), row.3.name())).or_insert((0, 0, 0));
        match row.4 {
            OutcomeStatus::Success => e.0 += 1,
            OutcomeStatus::Collision => e.1 += 1,
            OutcomeStatus::Stagnation => e.2 += 1,
        }
    }
    for ((family, strat), (s, c, t)) in &counts {
        println!("{family:20} {strat:10} S={s:3} C={c:3} T={t:3}  SR={:.1}%", *s as f64 / (*s + *c + *t).max(1) as f64 * 100.0);
    }
    println!("wall: {:?}", t0.elapsed());
}
