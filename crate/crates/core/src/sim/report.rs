//! Per-run metrics.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Strategy;

/// Delivered bytes split by where they came from.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ByteSources {
    /// Demand- or replica-cached data at the user's own DTN.
    pub local: f64,
    pub peer: f64,
    pub origin: f64,
    /// Prefetched data consumed for the first time.
    pub prefetch: f64,
    /// Data pushed by a real-time stream.
    pub stream: f64,
}

impl ByteSources {
    pub fn total(&self) -> f64 {
        self.local + self.peer + self.origin + self.prefetch + self.stream
    }
}

/// Fate of every prefetched byte.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PrefetchStats {
    pub prefetched: f64,
    pub consumed: f64,
    /// Requested while the prefetch was still in flight.
    pub late: f64,
    /// Evicted before any request used it.
    pub evicted: f64,
    /// Never requested before the run ended.
    pub wrong: f64,
    pub plans: u64,
    pub transfers: u64,
}

impl PrefetchStats {
    /// Share of prefetched bytes that a request used; `None` without
    /// prefetching.
    pub fn recall(&self) -> Option<f64> {
        (self.prefetched > 0.0).then(|| self.consumed / self.prefetched)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimReport {
    pub strategy: Strategy,
    pub requests: u64,
    /// Requests that needed at least one origin read through the queue.
    pub origin_requests: u64,
    /// `origin_requests / requests`; a run without caching scores 1.
    pub normalized_origin_requests: f64,
    /// Queue wait of origin-served requests, seconds.
    pub latency_mean: f64,
    pub latency_p50: f64,
    pub latency_p95: f64,
    pub latency_p99: f64,
    /// Mean of per-request `bytes / (completion - submission)`, Mbps.
    pub throughput_mean_mbps: f64,
    /// Total bytes over summed request durations, Mbps.
    pub throughput_aggregate_mbps: f64,
    pub recall: Option<f64>,
    pub prefetch: PrefetchStats,
    pub bytes: ByteSources,
    pub local_fraction: f64,
    /// Every byte that left the server DTN, for any purpose.
    pub server_bytes: f64,
    pub stream_reads: u64,
    pub stream_subscriptions: u64,
    pub replicated_bytes: f64,
    pub rebalances: u64,
    pub hub_changes: u64,
    pub migration_bytes: f64,
    pub peak_in_service: usize,
    pub peak_port_load: f64,
    /// Time of the last event.
    pub makespan: f64,
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = libm::ceil(p / 100.0 * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub(crate) fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.0);
        assert_eq!(percentile(&v, 99.0), 4.0);
        assert_eq!(percentile(&[], 50.0), 0.0);
    }

    #[test]
    fn recall_undefined_without_prefetch() {
        assert_eq!(PrefetchStats::default().recall(), None);
        let s = PrefetchStats { prefetched: 4.0, consumed: 3.0, ..Default::default() };
        assert_eq!(s.recall(), Some(0.75));
    }
}
