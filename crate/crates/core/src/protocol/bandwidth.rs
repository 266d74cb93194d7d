//! Bandwidth ledger and the closed-form cost model of the two strategies.
//!
//! All rates count payload bytes (the information content; headers are
//! transport framing) at the 10 Hz communication frame rate. Mbps values
//! use the 2^20 bits-per-second convention.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::wire::{REQUEST_PAYLOAD_BYTES, ROUND2_PAYLOAD_BYTES};
use crate::perception::MAX_DETECTIONS;
use crate::world::VehicleId;

/// Communication frames per second.
pub const FRAME_HZ: f64 = 10.0;
/// Worst-case round-1 payload: 50 centers of two 4-byte floats.
pub const ROUND1_MAX_PAYLOAD_BYTES: usize = MAX_DETECTIONS * 2 * 4;
/// Bits per Mbps under the binary convention.
pub const BITS_PER_MBPS: f64 = (1u64 << 20) as f64;

pub fn bytes_per_s_to_mbps(bytes_per_s: f64) -> f64 {
    bytes_per_s * 8.0 / BITS_PER_MBPS
}

/// Peer-selection strategy of the communication protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SelectionStrategy {
    Selective,
    Random,
}

/// Byte-rate summary of one episode or one design point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    /// Average payload bytes per second transmitted by each vehicle.
    pub per_vehicle_bytes_per_s: BTreeMap<VehicleId, f64>,
    /// Channel requirement of a single participating vehicle, Mbps.
    pub single_vehicle_mbps: f64,
    /// Aggregate over all vehicles, Mbps.
    pub total_mbps: f64,
    /// Aggregate over all vehicles, bytes per second.
    pub total_bytes_per_s: f64,
}

/// Worst-case design-point rates for a given scope configuration.
///
/// Per stream at 10 Hz: 670,720 B/s of point features per selected vehicle,
/// 4,000 B/s of round-1 centers per scope member (selective only), and 4 B
/// per request to each selected vehicle (selective only). The random
/// baseline has no round 1 and no requests. The single-vehicle figure
/// follows the cost model's accounting: one member's round-1 stream, the
/// full request cost, and one point-feature stream.
pub fn bandwidth_totals(n_s: usize, n_c: usize, strategy: SelectionStrategy) -> BandwidthReport {
    let round2_rate = ROUND2_PAYLOAD_BYTES as f64 * FRAME_HZ;
    let round1_rate = ROUND1_MAX_PAYLOAD_BYTES as f64 * FRAME_HZ;
    let request_rate = n_c as f64 * REQUEST_PAYLOAD_BYTES as f64 * FRAME_HZ;

    // Synthetic ids: ego is 0, scope members are 1..=n_s, and the selected
    // vehicles are the first n_c members.
    let mut per_vehicle = BTreeMap::new();
    let single_bytes_per_s;
    match strategy {
        SelectionStrategy::Selective => {
            per_vehicle.insert(0, request_rate);
            for member in 1..=n_s as VehicleId {
                let mut rate = round1_rate;
                if (member as usize) <= n_c {
                    rate += round2_rate;
                }
                per_vehicle.insert(member, rate);
            }
            single_bytes_per_s = round1_rate + request_rate + round2_rate;
        }
        SelectionStrategy::Random => {
            for member in 1..=n_c as VehicleId {
                per_vehicle.insert(member, round2_rate);
            }
            single_bytes_per_s = round2_rate;
        }
    }
    let total: f64 = per_vehicle.values().sum();
    BandwidthReport {
        per_vehicle_bytes_per_s: per_vehicle,
        single_vehicle_mbps: bytes_per_s_to_mbps(single_bytes_per_s),
        total_mbps: bytes_per_s_to_mbps(total),
        total_bytes_per_s: total,
    }
}

/// Per-episode accumulator of transmitted payload bytes.
#[derive(Debug, Clone, Default)]
pub struct BandwidthLedger {
    bytes_by_vehicle: BTreeMap<VehicleId, u64>,
}

impl BandwidthLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, sender: VehicleId, payload_bytes: usize) {
        *self.bytes_by_vehicle.entry(sender).or_insert(0) += payload_bytes as u64;
    }

    pub fn total_bytes(&self) -> u64 {
        self.bytes_by_vehicle.values().sum()
    }

    /// Averages the accumulated bytes over `elapsed` seconds. The
    /// single-vehicle figure reports the busiest sender.
    pub fn report(&self, elapsed: f64) -> BandwidthReport {
        if elapsed <= 0.0 {
            return BandwidthReport::default();
        }
        let per_vehicle: BTreeMap<VehicleId, f64> = self
            .bytes_by_vehicle
            .iter()
            .map(|(&id, &bytes)| (id, bytes as f64 / elapsed))
            .collect();
        let total: f64 = per_vehicle.values().sum();
        let busiest = per_vehicle.values().cloned().fold(0.0, f64::max);
        BandwidthReport {
            per_vehicle_bytes_per_s: per_vehicle,
            single_vehicle_mbps: bytes_per_s_to_mbps(busiest),
            total_mbps: bytes_per_s_to_mbps(total),
            total_bytes_per_s: total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_baseline_matches_cost_model() {
        let report = bandwidth_totals(6, 3, SelectionStrategy::Random);
        assert_eq!(report.total_bytes_per_s, 2_012_160.0);
        assert!((report.total_mbps - 15.3515625).abs() < 1e-12);
        assert!((report.single_vehicle_mbps - 5.1171875).abs() < 1e-12);
    }

    #[test]
    fn selective_totals_match_cost_model() {
        let six = bandwidth_totals(6, 3, SelectionStrategy::Selective);
        assert_eq!(six.total_bytes_per_s, 2_036_280.0);
        assert!((six.total_mbps - 15.53558349609375).abs() < 1e-12);
        assert!((six.single_vehicle_mbps - 5.14862060546875).abs() < 1e-12);

        let ten = bandwidth_totals(10, 3, SelectionStrategy::Selective);
        assert_eq!(ten.total_bytes_per_s, 2_052_280.0);
        assert_eq!(ten.total_bytes_per_s - six.total_bytes_per_s, 16_000.0);
    }

    #[test]
    fn ledger_averages_per_second() {
        let mut ledger = BandwidthLedger::new();
        ledger.record(3, 400);
        ledger.record(3, 400);
        ledger.record(5, 67_072);
        let report = ledger.report(2.0);
        assert_eq!(report.per_vehicle_bytes_per_s[&3], 400.0);
        assert_eq!(report.per_vehicle_bytes_per_s[&5], 33_536.0);
        assert_eq!(report.total_bytes_per_s, 33_936.0);
        assert_eq!(ledger.report(0.0), BandwidthReport::default());
    }
}
