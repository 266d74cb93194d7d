//! Hot-path benchmarks: lidar scans, space-time planning, one full
//! communication exchange, and an entire episode.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use coopsim_core::episode::{run_episode, EpisodeParams, Strategy};
use coopsim_core::lidar::{scan, LidarConfig};
use coopsim_core::policy::plan_astar;
use coopsim_core::protocol::{
    run_exchange, BandwidthLedger, ExchangeConfig, InprocTransport, SelectionStrategy,
};
use coopsim_core::scenarios::{build_world, ScenarioConfig, ScenarioFamily};

fn scenario() -> coopsim_core::scenarios::Scenario {
    let config = ScenarioConfig::from_index(ScenarioFamily::RedLightViolation, 13, 0);
    build_world(&config).unwrap()
}

fn bench_scan(c: &mut Criterion) {
    let scenario = scenario();
    let lidar = LidarConfig::default();
    c.bench_function("lidar_scan_ego", |b| {
        b.iter(|| scan(&scenario.world, scenario.ego_id, &lidar, 7))
    });
}

fn bench_plan(c: &mut Criterion) {
    let blocked = |cell: (i32, i32), t: usize| {
        // A diagonal moving wall.
        cell.0 == 10 && (cell.1 as usize) == t % 20
    };
    c.bench_function("plan_astar_40x40", |b| {
        b.iter(|| plan_astar((0, 0), (35, 12), &blocked, 60, 1.0, 0.5).unwrap())
    });
}

fn bench_exchange(c: &mut Criterion) {
    let scenario = scenario();
    let config = ExchangeConfig::default();
    c.bench_function("exchange_selective_tick", |b| {
        b.iter(|| {
            let mut det_rng = ChaCha8Rng::seed_from_u64(1);
            let mut sel_rng = ChaCha8Rng::seed_from_u64(2);
            let mut ledger = BandwidthLedger::new();
            run_exchange(
                &scenario.world,
                scenario.ego_id,
                SelectionStrategy::Selective,
                &config,
                &mut det_rng,
                &mut sel_rng,
                &mut InprocTransport,
                &mut ledger,
            )
            .unwrap()
        })
    });
}

fn bench_episode(c: &mut Criterion) {
    let scenario = scenario();
    let mut group = c.benchmark_group("episode");
    group.sample_size(10);
    group.bench_function("selective_full", |b| {
        b.iter(|| {
            run_episode(
                &scenario,
                Strategy::Selective,
                &EpisodeParams::default(),
                &mut InprocTransport,
                None,
                false,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_scan, bench_plan, bench_exchange, bench_episode);
criterion_main!(benches);
