//! Campaign runner: enumerates (family, configuration, seed, strategy)
//! episodes, runs the oracle expert first for reference times, executes the
//! matrix across a worker pool, and writes deterministic CSV reports.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::episode::{run_episode, EpisodeParams, EpisodeResult, Strategy};
use crate::metrics::{aggregate, sct, CampaignResult, EpisodeRow};
use crate::protocol::{InprocTransport, MessageTransport, UdpTransport};
use crate::scenarios::{build_world, ScenarioConfig, ScenarioError, ScenarioFamily};
use crate::world::OutcomeStatus;

fn default_seeds_per_config() -> usize {
    3
}

/// Declarative description of an experiment matrix, loadable from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSpec {
    pub families: Vec<ScenarioFamily>,
    pub strategies: Vec<Strategy>,
    pub n_s_list: Vec<usize>,
    pub n_c: usize,
    #[serde(default = "default_seeds_per_config")]
    pub seeds_per_config: usize,
    #[serde(default)]
    pub parallelism: Option<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Subset of the 27 configuration indices; all when omitted.
    #[serde(default)]
    pub config_indices: Option<Vec<usize>>,
    #[serde(default)]
    pub background_count: Option<usize>,
    #[serde(default)]
    pub time_limit: Option<f64>,
}

impl CampaignSpec {
    /// The full evaluation matrix: three families, both scope sizes for the
    /// selective strategy, and the random baseline.
    pub fn paper_matrix() -> Self {
        Self {
            families: ScenarioFamily::ALL.to_vec(),
            strategies: vec![Strategy::Selective, Strategy::Random],
            n_s_list: vec![6, 10],
            n_c: 3,
            seeds_per_config: 3,
            parallelism: None,
            output_dir: None,
            config_indices: None,
            background_count: None,
            time_limit: None,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.families.is_empty() || self.strategies.is_empty() {
            return Err(CampaignError::EmptySpec);
        }
        if self.seeds_per_config == 0 {
            return Err(CampaignError::EmptySpec);
        }
        let needs_scope = self
            .strategies
            .iter()
            .any(|s| matches!(s, Strategy::Selective | Strategy::Random));
        if needs_scope {
            let min_n_s = self.n_s_list.iter().copied().min().ok_or(CampaignError::EmptySpec)?;
            if self.n_c > min_n_s {
                return Err(CampaignError::CommScopeTooLarge {
                    n_c: self.n_c,
                    min_n_s,
                });
            }
        }
        if let Some(indices) = &self.config_indices {
            if let Some(&bad) = indices
                .iter()
                .find(|&&i| i >= crate::scenarios::CONFIGS_PER_FAMILY)
            {
                return Err(CampaignError::BadConfigIndex(bad));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Inproc,
    Udp,
}

impl TransportKind {
    fn make(&self) -> Box<dyn MessageTransport> {
        match self {
            TransportKind::Inproc => Box::new(InprocTransport),
            TransportKind::Udp => Box::new(UdpTransport::new()),
        }
    }
}

/// Runtime options supplied by the command line.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub replay_dir: Option<PathBuf>,
    pub transport: TransportKind,
    pub jobs: Option<usize>,
    pub plot_csv: bool,
    /// Overrides every scenario seed (smoke tests).
    pub seed_override: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: None,
            replay_dir: None,
            transport: TransportKind::Inproc,
            jobs: None,
            plot_csv: false,
            seed_override: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("campaign spec has no families, strategies, or seeds")]
    EmptySpec,
    #[error("n_c = {n_c} exceeds the smallest selection scope {min_n_s}")]
    CommScopeTooLarge { n_c: usize, min_n_s: usize },
    #[error("config index {0} out of range")]
    BadConfigIndex(usize),
    #[error("scenario construction failed: {0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// Everything produced by one campaign run.
#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub rows: Vec<EpisodeRow>,
    pub result: CampaignResult,
    /// The campaign CSV content as written (first line is a timestamp).
    pub report_csv: String,
    pub episodes_csv: String,
}

struct UnitOutcome {
    rows: Vec<EpisodeRow>,
}

/// Runs the whole matrix. The oracle expert always runs first on each
/// (family, configuration, seed) unit to measure the reference completion
/// time; every requested strategy then replays the identical scenario.
pub fn run_campaign(
    spec: &CampaignSpec,
    options: &RunOptions,
) -> Result<CampaignOutput, CampaignError> {
    spec.validate()?;

    let mut units = Vec::new();
    let indices: Vec<usize> = spec
        .config_indices
        .clone()
        .unwrap_or_else(|| (0..crate::scenarios::CONFIGS_PER_FAMILY).collect());
    let seeds: Vec<u64> = match options.seed_override {
        Some(seed) => vec![seed],
        None => (0..spec.seeds_per_config as u64).collect(),
    };
    for &family in &spec.families {
        for &config_index in &indices {
            for &seed in &seeds {
                units.push((family, config_index, seed));
            }
        }
    }

    let run_units = || -> Vec<Result<UnitOutcome, CampaignError>> {
        units
            .par_iter()
            .map(|&(family, config_index, seed)| run_unit(spec, options, family, config_index, seed))
            .collect()
    };
    let results = match spec.parallelism.or(options.jobs) {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CampaignError::ThreadPool(e.to_string()))?
            .install(run_units),
        None => run_units(),
    };

    let mut rows = Vec::new();
    let mut first_error = None;
    for result in results {
        match result {
            Ok(unit) => rows.extend(unit.rows),
            Err(e) if first_error.is_none() => first_error = Some(e),
            Err(_) => {}
        }
    }
    rows.sort_by(|a, b| {
        (a.family, a.config_index, a.seed, a.strategy, a.n_s)
            .cmp(&(b.family, b.config_index, b.seed, b.strategy, b.n_s))
    });

    let result = aggregate(&rows);
    let report_csv = render_report_csv(&result);
    let episodes_csv = render_episodes_csv(&rows);
    if let Some(dir) = &options.out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("campaign.csv"), &report_csv)?;
        fs::write(dir.join("episodes.csv"), &episodes_csv)?;
    }

    // Partial results are flushed above before reporting the failure.
    if let Some(e) = first_error {
        return Err(e);
    }
    Ok(CampaignOutput {
        rows,
        result,
        report_csv,
        episodes_csv,
    })
}

fn episode_params(spec: &CampaignSpec, n_s: usize) -> EpisodeParams {
    let mut params = EpisodeParams {
        n_s,
        n_c: spec.n_c,
        ..EpisodeParams::default()
    };
    if let Some(limit) = spec.time_limit {
        params.time_limit = limit;
    }
    params
}

fn run_unit(
    spec: &CampaignSpec,
    options: &RunOptions,
    family: ScenarioFamily,
    config_index: usize,
    seed: u64,
) -> Result<UnitOutcome, CampaignError> {
    let mut config = ScenarioConfig::from_index(family, config_index, seed);
    if let Some(count) = spec.background_count {
        config.background_count = count;
    }
    let scenario = build_world(&config)?;

    let mut rows = Vec::new();
    let run_one = |strategy: Strategy, n_s: usize| -> Result<EpisodeResult, CampaignError> {
        let params = episode_params(spec, n_s);
        let mut transport = options.transport.make();
        let mut replay_file = match &options.replay_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                Some(fs::File::create(dir.join(format!(
                    "{}_{:02}_s{}_{}_{}.csv",
                    family.name(),
                    config_index,
                    seed,
                    strategy.name(),
                    n_s
                )))?)
            }
            None => None,
        };
        let result = run_episode(
            &scenario,
            strategy,
            &params,
            transport.as_mut(),
            replay_file.as_mut().map(|f| f as &mut dyn Write),
            options.plot_csv,
        )?;
        if options.plot_csv {
            if let Some(dir) = &options.out_dir {
                write_trace_csv(dir, family, config_index, seed, strategy, n_s, &result)?;
            }
        }
        Ok(result)
    };

    // Expert reference pass.
    let oracle_result = run_one(Strategy::Oracle, 0)?;
    let t_expert = if oracle_result.outcome.status == OutcomeStatus::Success {
        oracle_result.outcome.completion_time
    } else {
        // A failed expert run still provides a time scale for SCT; the
        // solvability acceptance test flags it loudly.
        spec.time_limit.unwrap_or(crate::world::DEFAULT_TIME_LIMIT)
    };

    let mut record = |strategy: Strategy,
                      n_s: usize,
                      result: &EpisodeResult|
     -> Result<(), CampaignError> {
        let (sct_value, sct_capped) =
            sct(&result.outcome, t_expert).unwrap_or((0.0, false));
        rows.push(EpisodeRow {
            family,
            config_index,
            seed,
            strategy,
            n_s,
            n_c: if strategy == Strategy::Selective || strategy == Strategy::Random {
                spec.n_c
            } else {
                0
            },
            outcome: result.outcome.clone(),
            t_expert,
            sct: sct_value,
            sct_capped,
            degenerate_scope_ticks: result.degenerate_scope_ticks,
        });
        Ok(())
    };

    for &strategy in &spec.strategies {
        match strategy {
            Strategy::Oracle => record(Strategy::Oracle, 0, &oracle_result)?,
            Strategy::NoComm => {
                let result = run_one(Strategy::NoComm, 0)?;
                record(Strategy::NoComm, 0, &result)?;
            }
            Strategy::Selective | Strategy::Random => {
                for &n_s in &spec.n_s_list {
                    let result = run_one(strategy, n_s)?;
                    record(strategy, n_s, &result)?;
                }
            }
        }
    }
    Ok(UnitOutcome { rows })
}

fn write_trace_csv(
    dir: &Path,
    family: ScenarioFamily,
    config_index: usize,
    seed: u64,
    strategy: Strategy,
    n_s: usize,
    result: &EpisodeResult,
) -> io::Result<()> {
    if result.traces.is_empty() {
        return Ok(());
    }
    let trace_dir = dir.join("traces");
    fs::create_dir_all(&trace_dir)?;
    let mut file = fs::File::create(trace_dir.join(format!(
        "{}_{:02}_s{}_{}_{}.csv",
        family.name(),
        config_index,
        seed,
        strategy.name(),
        n_s
    )))?;
    writeln!(file, "tick,vehicle_id,utility,selected")?;
    for trace in &result.traces {
        if trace.utilities.is_empty() {
            for id in &trace.selected {
                writeln!(file, "{},{},,1", trace.tick, id)?;
            }
        } else {
            for (id, utility) in &trace.utilities {
                let selected = trace.selected.contains(id) as u8;
                writeln!(file, "{},{},{},{}", trace.tick, id, utility, selected)?;
            }
        }
    }
    Ok(())
}

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Aggregate report: one row per (family, strategy, n_s, n_c) group plus an
/// unweighted average row over the three families for complete columns.
fn render_report_csv(result: &CampaignResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("# generated unix:{}\n", unix_timestamp()));
    out.push_str(
        "family,strategy,n_s,n_c,episodes,sr,sct,cr,stagnation,single_mbps,total_mbps,bytes_per_s_total\n",
    );
    for (key, stats) in &result.groups {
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.1}\n",
            key.family.name(),
            key.strategy.name(),
            key.n_s,
            key.n_c,
            stats.episodes,
            stats.success_rate,
            stats.sct_mean,
            stats.collision_rate,
            stats.stagnation_rate,
            stats.mean_single_mbps,
            stats.mean_total_mbps,
            stats.mean_bytes_per_s,
        ));
    }
    // Average rows for columns present in every family.
    let mut columns: Vec<(Strategy, usize, usize)> = result
        .groups
        .keys()
        .map(|k| (k.strategy, k.n_s, k.n_c))
        .collect();
    columns.sort();
    columns.dedup();
    for (strategy, n_s, n_c) in columns {
        let avg = |f: fn(&crate::metrics::GroupStats) -> f64| {
            result.family_average(strategy, n_s, n_c, f)
        };
        if let (Some(sr), Some(sct), Some(cr), Some(stag), Some(single), Some(total), Some(bytes)) = (
            avg(|s| s.success_rate),
            avg(|s| s.sct_mean),
            avg(|s| s.collision_rate),
            avg(|s| s.stagnation_rate),
            avg(|s| s.mean_single_mbps),
            avg(|s| s.mean_total_mbps),
            avg(|s| s.mean_bytes_per_s),
        ) {
            let episodes: usize = ScenarioFamily::ALL
                .iter()
                .filter_map(|&f| result.group(f, strategy, n_s, n_c))
                .map(|s| s.episodes)
                .sum();
            out.push_str(&format!(
                "average,{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.1}\n",
                strategy.name(),
                n_s,
                n_c,
                episodes,
                sr,
                sct,
                cr,
                stag,
                single,
                total,
                bytes,
            ));
        }
    }
    out
}

fn render_episodes_csv(rows: &[EpisodeRow]) -> String {
    let mut out = String::new();
    out.push_str(
        "family,config_index,seed,strategy,n_s,n_c,status,completion_time,ticks,sct,sct_capped,t_expert,total_bytes_per_s,degenerate_scope_ticks\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:?},{:.2},{},{:.6},{},{:.2},{:.1},{}\n",
            row.family.name(),
            row.config_index,
            row.seed,
            row.strategy.name(),
            row.n_s,
            row.n_c,
            row.outcome.status,
            row.outcome.completion_time,
            row.outcome.ticks,
            row.sct,
            row.sct_capped as u8,
            row.t_expert,
            row.outcome.bandwidth_report.total_bytes_per_s,
            row.degenerate_scope_ticks,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smoke_spec() -> CampaignSpec {
        CampaignSpec {
            families: vec![ScenarioFamily::Overtaking],
            strategies: vec![Strategy::Selective, Strategy::NoComm, Strategy::Oracle],
            n_s_list: vec![6],
            n_c: 3,
            seeds_per_config: 1,
            parallelism: Some(2),
            output_dir: None,
            config_indices: Some(vec![0]),
            background_count: None,
            time_limit: None,
        }
    }

    #[test]
    fn spec_validation() {
        let mut spec = smoke_spec();
        assert!(spec.validate().is_ok());
        spec.n_c = 7;
        assert!(matches!(
            spec.validate(),
            Err(CampaignError::CommScopeTooLarge { .. })
        ));
        spec.n_c = 3;
        spec.config_indices = Some(vec![27]);
        assert!(matches!(
            spec.validate(),
            Err(CampaignError::BadConfigIndex(27))
        ));
    }

    #[test]
    fn smoke_campaign_runs_and_reports() {
        let spec = smoke_spec();
        let output = run_campaign(&spec, &RunOptions::default()).unwrap();
        // 1 oracle + 1 selective + 1 no_comm row.
        assert_eq!(output.rows.len(), 3);
        assert!(output.report_csv.starts_with("# generated unix:"));
        assert!(output.report_csv.contains("overtaking,selective,6,3"));
        let oracle_row = output
            .rows
            .iter()
            .find(|r| r.strategy == Strategy::Oracle)
            .unwrap();
        assert_eq!(oracle_row.outcome.status, OutcomeStatus::Success);
        // Oracle reference equals its own completion time, so its SCT is 1.
        assert_eq!(oracle_row.sct, 1.0);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = CampaignSpec::paper_matrix();
        let json = serde_json::to_string_pretty(&spec).unwrap();
        assert!(json.contains("\"selective\""));
        assert!(json.contains("\"n_s_list\""));
        let back: CampaignSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back.n_s_list, vec![6, 10]);
    }
}
