//! Report files of a sweep run.
//!
//! A run directory holds `cells.csv` (one row per sweep cell), one pivot
//! table per headline metric (conditions as rows, strategies as columns),
//! the resolved `config.toml` and `manifest.json` with the config hash and
//! per-file digests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::sweep::CellResult;
use crate::Error;

/// Flat per-cell record; bytes are in bytes, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub strategy: String,
    pub cache_bytes: u64,
    pub policy: String,
    pub network: String,
    pub traffic: f64,
    pub requests: u64,
    pub origin_requests: u64,
    pub normalized_origin_requests: f64,
    pub latency_mean_s: f64,
    pub latency_p50_s: f64,
    pub latency_p95_s: f64,
    pub latency_p99_s: f64,
    pub throughput_mean_mbps: f64,
    pub throughput_aggregate_mbps: f64,
    pub recall: Option<f64>,
    pub prefetched_bytes: f64,
    pub prefetch_consumed_bytes: f64,
    pub prefetch_late_bytes: f64,
    pub prefetch_evicted_bytes: f64,
    pub prefetch_wrong_bytes: f64,
    pub prefetch_plans: u64,
    pub local_bytes: f64,
    pub peer_bytes: f64,
    pub origin_bytes: f64,
    pub prefetch_bytes: f64,
    pub stream_bytes: f64,
    pub local_fraction: f64,
    pub server_bytes: f64,
    pub stream_reads: u64,
    pub stream_subscriptions: u64,
    pub replicated_bytes: f64,
    pub rebalances: u64,
    pub hub_changes: u64,
    pub peak_in_service: usize,
    pub makespan_s: f64,
}

impl From<&CellResult> for CellRow {
    fn from(c: &CellResult) -> Self {
        let r = &c.outcome.report;
        Self {
            strategy: c.cell.strategy.to_string(),
            cache_bytes: c.cell.cache.0,
            policy: c.cell.policy.to_string(),
            network: c.cell.network.to_string(),
            traffic: c.cell.traffic,
            requests: r.requests,
            origin_requests: r.origin_requests,
            normalized_origin_requests: r.normalized_origin_requests,
            latency_mean_s: r.latency_mean,
            latency_p50_s: r.latency_p50,
            latency_p95_s: r.latency_p95,
            latency_p99_s: r.latency_p99,
            throughput_mean_mbps: r.throughput_mean_mbps,
            throughput_aggregate_mbps: r.throughput_aggregate_mbps,
            recall: r.recall,
            prefetched_bytes: r.prefetch.prefetched,
            prefetch_consumed_bytes: r.prefetch.consumed,
            prefetch_late_bytes: r.prefetch.late,
            prefetch_evicted_bytes: r.prefetch.evicted,
            prefetch_wrong_bytes: r.prefetch.wrong,
            prefetch_plans: r.prefetch.plans,
            local_bytes: r.bytes.local,
            peer_bytes: r.bytes.peer,
            origin_bytes: r.bytes.origin,
            prefetch_bytes: r.bytes.prefetch,
            stream_bytes: r.bytes.stream,
            local_fraction: r.local_fraction,
            server_bytes: r.server_bytes,
            stream_reads: r.stream_reads,
            stream_subscriptions: r.stream_subscriptions,
            replicated_bytes: r.replicated_bytes,
            rebalances: r.rebalances,
            hub_changes: r.hub_changes,
            peak_in_service: r.peak_in_service,
            makespan_s: r.makespan,
        }
    }
}

impl CellRow {
    /// Everything but the strategy.
    pub fn condition(&self) -> Condition {
        Condition {
            traffic: self.traffic,
            network: self.network.clone(),
            policy: self.policy.clone(),
            cache_bytes: self.cache_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub traffic: f64,
    pub network: String,
    pub policy: String,
    pub cache_bytes: u64,
}

pub fn write_cells<W: Write>(w: W, rows: &[CellRow]) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_cells<R: Read>(r: R) -> Result<Vec<CellRow>, Error> {
    csv::Reader::from_reader(r).deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Metrics that get their own pivot table.
pub const METRICS: [Metric; 4] = [
    Metric::NormalizedOriginRequests,
    Metric::ThroughputMbps,
    Metric::LatencyMean,
    Metric::Recall,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    NormalizedOriginRequests,
    ThroughputMbps,
    LatencyMean,
    Recall,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::NormalizedOriginRequests => "origin_requests",
            Metric::ThroughputMbps => "throughput_mbps",
            Metric::LatencyMean => "latency_s",
            Metric::Recall => "recall",
        }
    }

    pub fn of(self, row: &CellRow) -> Option<f64> {
        match self {
            Metric::NormalizedOriginRequests => Some(row.normalized_origin_requests),
            Metric::ThroughputMbps => Some(row.throughput_mean_mbps),
            Metric::LatencyMean => Some(row.latency_mean_s),
            Metric::Recall => row.recall,
        }
    }
}

/// Conditions down, strategies across, both in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct Pivot {
    pub strategies: Vec<String>,
    pub rows: Vec<(Condition, Vec<Option<f64>>)>,
}

pub fn pivot(rows: &[CellRow], metric: Metric) -> Pivot {
    let mut strategies: Vec<String> = Vec::new();
    for r in rows {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy.clone());
        }
    }
    let mut out: Vec<(Condition, Vec<Option<f64>>)> = Vec::new();
    for r in rows {
        let cond = r.condition();
        let col = strategies.iter().position(|s| *s == r.strategy).unwrap();
        let idx = match out.iter().position(|(c, _)| *c == cond) {
            Some(i) => i,
            None => {
                out.push((cond, vec![None; strategies.len()]));
                out.len() - 1
            }
        };
        out[idx].1[col] = metric.of(r);
    }
    Pivot { strategies, rows: out }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

pub fn write_pivot<W: Write>(w: W, p: &Pivot) -> Result<(), Error> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["traffic".to_string(), "network".into(), "policy".into(), "cache_bytes".into()];
    header.extend(p.strategies.iter().cloned());
    wtr.write_record(&header)?;
    for (c, values) in &p.rows {
        let mut rec = vec![c.traffic.to_string(), c.network.clone(), c.policy.clone(), c.cache_bytes.to_string()];
        rec.extend(values.iter().map(|v| fmt_value(*v)));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Aligned plain-text rendering of every pivot table.
pub fn summary(rows: &[CellRow]) -> String {
    let mut out = String::new();
    for metric in METRICS {
        let p = pivot(rows, metric);
        let _ = writeln!(out, "== {}", metric.name());
        let _ = write!(out, "{:<36}", "condition");
        for s in &p.strategies {
            let _ = write!(out, "{s:>14}");
        }
        out.push('\n');
        for (c, values) in &p.rows {
            let label = format!(
                "x{} {} {} {}",
                c.traffic,
                c.network,
                c.policy,
                crate::units::ByteSize(c.cache_bytes)
            );
            let _ = write!(out, "{label:<36}");
            for v in values {
                let cell = v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
                let _ = write!(out, "{cell:>14}");
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub cells: usize,
    /// File name to SHA-256, for every other file of the run directory.
    pub files: BTreeMap<String, String>,
}

/// A fresh directory under `root` named after the config hash; earlier
/// runs of the same config are never overwritten.
pub fn fresh_run_dir(root: &Path, hash: &str) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(root).map_err(|e| Error::Path(root.to_path_buf(), e))?;
    let stem = &hash[..12.min(hash.len())];
    for n in 1.. {
        let name = if n == 1 { stem.to_string() } else { format!("{stem}-{n}") };
        let dir = root.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Error::Path(dir, e)),
        }
    }
    unreachable!()
}

fn put(dir: &Path, name: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<(), Error> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| Error::Path(path, e))?;
    files.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
    Ok(())
}

/// Writes every report file of a finished sweep into `dir`.
pub fn write_run(dir: &Path, cfg: &ExperimentConfig, results: &[CellResult]) -> Result<Manifest, Error> {
    let rows: Vec<CellRow> = results.iter().map(CellRow::from).collect();
    let mut files = BTreeMap::new();
    put(dir, "config.toml", cfg.to_toml()?.as_bytes(), &mut files)?;
    let mut buf = Vec::new();
    write_cells(&mut buf, &rows)?;
    put(dir, "cells.csv", &buf, &mut files)?;
    for metric in METRICS {
        let mut buf = Vec::new();
        write_pivot(&mut buf, &pivot(&rows, metric))?;
        put(dir, &format!("{}.csv", metric.name()), &buf, &mut files)?;
    }
    put(dir, "summary.txt", summary(&rows).as_bytes(), &mut files)?;
    let manifest = Manifest {
        tool: "obsflow".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: obsflow_core::VERSION.into(),
        config_sha256: cfg.hash()?,
        seed: cfg.seed,
        cells: rows.len(),
        files,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::Path(path, e))?;
    Ok(manifest)
}
