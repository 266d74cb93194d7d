//! Episode and campaign metrics: success rates, completion-time-weighted
//! success, collision and stagnation rates, bandwidth summaries, and a
//! two-sample Welch t-test over binary outcomes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::episode::Strategy;
use crate::scenarios::ScenarioFamily;
use crate::world::{EpisodeOutcome, OutcomeStatus};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("expert completion time must be positive, got {0}")]
    MissingExpertTime(f64),
    #[error("welch test needs at least two samples per side (got {0} and {1})")]
    TooFewSamples(usize, usize),
    #[error("welch test is undefined: zero variance with unequal means")]
    DegenerateVariance,
}

/// Success weighted by completion time: `I{success} * t_expert / t_model`,
/// capped at 1.0 when the model beats the expert (the cap is reported by
/// the second tuple element).
pub fn sct(outcome: &EpisodeOutcome, t_expert: f64) -> Result<(f64, bool), MetricsError> {
    if !(t_expert > 0.0) {
        return Err(MetricsError::MissingExpertTime(t_expert));
    }
    if outcome.status != OutcomeStatus::Success {
        return Ok((0.0, false));
    }
    let raw = t_expert / outcome.completion_time.max(f64::MIN_POSITIVE);
    Ok((raw.min(1.0), raw > 1.0))
}

/// One finished episode with its expert reference time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub family: ScenarioFamily,
    pub config_index: usize,
    pub seed: u64,
    pub strategy: Strategy,
    pub n_s: usize,
    pub n_c: usize,
    pub outcome: EpisodeOutcome,
    pub t_expert: f64,
    pub sct: f64,
    pub sct_capped: bool,
    /// Ticks on which the selection scope was short of n_s candidates.
    pub degenerate_scope_ticks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub family: ScenarioFamily,
    pub strategy: Strategy,
    pub n_s: usize,
    pub n_c: usize,
}

// Orderings for the BTreeMap group keys and the CSV row order.
impl ScenarioFamily {
    fn order(&self) -> u8 {
        match self {
            ScenarioFamily::Overtaking => 0,
            ScenarioFamily::LeftTurn => 1,
            ScenarioFamily::RedLightViolation => 2,
        }
    }
}

impl Ord for ScenarioFamily {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order().cmp(&other.order())
    }
}

impl PartialOrd for ScenarioFamily {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Aggregate statistics of one (family, strategy, scope) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub episodes: usize,
    pub successes: usize,
    pub collisions: usize,
    pub stagnations: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub stagnation_rate: f64,
    pub sct_mean: f64,
    pub sct_capped: usize,
    pub mean_single_mbps: f64,
    pub mean_total_mbps: f64,
    pub mean_bytes_per_s: f64,
}

/// Campaign aggregates grouped by (family, strategy, n_s, n_c).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CampaignResult {
    pub groups: BTreeMap<GroupKey, GroupStats>,
}

impl CampaignResult {
    pub fn group(
        &self,
        family: ScenarioFamily,
        strategy: Strategy,
        n_s: usize,
        n_c: usize,
    ) -> Option<&GroupStats> {
        self.groups.get(&GroupKey {
            family,
            strategy,
            n_s,
            n_c,
        })
    }

    /// Unweighted mean of a statistic over the three families for one
    /// (strategy, n_s, n_c) column, when every family is present.
    pub fn family_average(
        &self,
        strategy: Strategy,
        n_s: usize,
        n_c: usize,
        stat: impl Fn(&GroupStats) -> f64,
    ) -> Option<f64> {
        let values: Vec<f64> = ScenarioFamily::ALL
            .iter()
            .filter_map(|&family| self.group(family, strategy, n_s, n_c).map(&stat))
            .collect();
        (values.len() == ScenarioFamily::ALL.len())
            .then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Pooled success rate of one strategy column across families.
    pub fn pooled_success_rate(&self, strategy: Strategy, n_s: usize, n_c: usize) -> Option<f64> {
        let mut episodes = 0usize;
        let mut successes = 0usize;
        for (key, stats) in &self.groups {
            if key.strategy == strategy && key.n_s == n_s && key.n_c == n_c {
                episodes += stats.episodes;
                successes += stats.successes;
            }
        }
        (episodes > 0).then(|| successes as f64 / episodes as f64)
    }
}

/// Groups episode rows and computes per-group rates. Empty input produces
/// an empty result.
pub fn aggregate(rows: &[EpisodeRow]) -> CampaignResult {
    let mut buckets: BTreeMap<GroupKey, Vec<&EpisodeRow>> = BTreeMap::new();
    for row in rows {
        buckets
            .entry(GroupKey {
                family: row.family,
                strategy: row.strategy,
                n_s: row.n_s,
                n_c: row.n_c,
            })
            .or_default()
            .push(row);
    }
    let groups = buckets
        .into_iter()
        .map(|(key, rows)| {
            let episodes = rows.len();
            let count = |status: OutcomeStatus| {
                rows.iter()
                    .filter(|r| r.outcome.status == status)
                    .count()
            };
            let successes = count(OutcomeStatus::Success);
            let collisions = count(OutcomeStatus::Collision);
            let stagnations = count(OutcomeStatus::Stagnation);
            let mean = |f: &dyn Fn(&EpisodeRow) -> f64| {
                rows.iter().map(|r| f(r)).sum::<f64>() / episodes as f64
            };
            let stats = GroupStats {
                episodes,
                successes,
                collisions,
                stagnations,
                success_rate: successes as f64 / episodes as f64,
                collision_rate: collisions as f64 / episodes as f64,
                stagnation_rate: stagnations as f64 / episodes as f64,
                sct_mean: mean(&|r| r.sct),
                sct_capped: rows.iter().filter(|r| r.sct_capped).count(),
                mean_single_mbps: mean(&|r| r.outcome.bandwidth_report.single_vehicle_mbps),
                mean_total_mbps: mean(&|r| r.outcome.bandwidth_report.total_mbps),
                mean_bytes_per_s: mean(&|r| r.outcome.bandwidth_report.total_bytes_per_s),
            };
            (key, stats)
        })
        .collect();
    CampaignResult { groups }
}

/// Two-sided Welch t-test. Returns (t, p); `p` comes from the Student-t
/// CDF, i.e. the regularized incomplete beta function.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<(f64, f64), MetricsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(MetricsError::TooFewSamples(a.len(), b.len()));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (var(a, ma), var(b, mb));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se2 = va / na + vb / nb;
    if se2 <= 0.0 {
        return if ma == mb {
            Ok((0.0, 1.0))
        } else {
            Err(MetricsError::DegenerateVariance)
        };
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok((t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::BandwidthReport;

    fn outcome(status: OutcomeStatus, completion: f64) -> EpisodeOutcome {
        EpisodeOutcome {
            status,
            completion_time: completion,
            ticks: (completion / 0.1) as u64,
            bandwidth_report: BandwidthReport::default(),
        }
    }

    #[test]
    fn sct_examples() {
        let (v, capped) = sct(&outcome(OutcomeStatus::Success, 12.5), 10.0).unwrap();
        assert!((v - 0.8).abs() < 1e-12);
        assert!(!capped);

        let (v, _) = sct(&outcome(OutcomeStatus::Collision, 4.0), 10.0).unwrap();
        assert_eq!(v, 0.0);
        let (v, _) = sct(&outcome(OutcomeStatus::Stagnation, 60.0), 10.0).unwrap();
        assert_eq!(v, 0.0);

        let (v, _) = sct(&outcome(OutcomeStatus::Success, 10.0), 10.0).unwrap();
        assert_eq!(v, 1.0);

        // Faster than the expert: capped and flagged.
        let (v, capped) = sct(&outcome(OutcomeStatus::Success, 5.0), 10.0).unwrap();
        assert_eq!(v, 1.0);
        assert!(capped);

        assert!(sct(&outcome(OutcomeStatus::Success, 5.0), 0.0).is_err());
    }

    fn row(status: OutcomeStatus, sct: f64) -> EpisodeRow {
        EpisodeRow {
            family: ScenarioFamily::Overtaking,
            config_index: 0,
            seed: 0,
            strategy: Strategy::Selective,
            n_s: 6,
            n_c: 3,
            outcome: outcome(status, 10.0),
            t_expert: 10.0,
            sct,
            sct_capped: false,
            degenerate_scope_ticks: 0,
        }
    }

    #[test]
    fn aggregate_rates_sum_to_one() {
        let rows: Vec<EpisodeRow> = vec![
            row(OutcomeStatus::Success, 1.0),
            row(OutcomeStatus::Success, 0.8),
            row(OutcomeStatus::Collision, 0.0),
            row(OutcomeStatus::Stagnation, 0.0),
        ];
        let result = aggregate(&rows);
        let stats = result
            .group(ScenarioFamily::Overtaking, Strategy::Selective, 6, 3)
            .unwrap();
        assert_eq!(stats.episodes, 4);
        assert_eq!(stats.success_rate, 0.5);
        assert_eq!(stats.collision_rate, 0.25);
        assert_eq!(stats.stagnation_rate, 0.25);
        assert_eq!(
            stats.successes + stats.collisions + stats.stagnations,
            stats.episodes
        );
        assert!((stats.sct_mean - 0.45).abs() < 1e-12);
    }

    #[test]
    fn aggregate_single_success() {
        let result = aggregate(&[row(OutcomeStatus::Success, 1.0)]);
        let stats = result
            .group(ScenarioFamily::Overtaking, Strategy::Selective, 6, 3)
            .unwrap();
        assert_eq!(stats.success_rate, 1.0);
        assert_eq!(stats.collision_rate, 0.0);
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 0.0, 1.0, 1.0];
        let (t, p) = welch_t_test(&a, &a).unwrap();
        assert_eq!(t, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_reference_value() {
        // Independently computed with scipy.stats.ttest_ind(equal_var=False):
        // t = 1.414213562373095, df = 6, p = 0.20703125.
        let a = [1.0, 1.0, 1.0, 0.0];
        let b = [0.0, 0.0, 0.0, 1.0];
        let (t, p) = welch_t_test(&a, &b).unwrap();
        assert!((t - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((p - 0.20703125).abs() < 1e-9);
    }

    #[test]
    fn welch_symmetry() {
        let a = [1.0, 1.0, 0.0, 1.0, 0.0];
        let b = [0.0, 1.0, 0.0, 0.0, 0.0];
        let (t_ab, p_ab) = welch_t_test(&a, &b).unwrap();
        let (t_ba, p_ba) = welch_t_test(&b, &a).unwrap();
        assert!((t_ab + t_ba).abs() < 1e-12);
        assert!((p_ab - p_ba).abs() < 1e-12);
    }

    #[test]
    fn welch_guards() {
        assert!(welch_t_test(&[1.0], &[0.0, 1.0]).is_err());
        assert!(welch_t_test(&[1.0, 1.0], &[0.0, 0.0]).is_err());
        let (t, p) = welch_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!((t, p), (0.0, 1.0));
    }
}
