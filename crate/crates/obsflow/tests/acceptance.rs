//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines always show. Exits non-zero if any
//! asserted criterion fails; the strategy-ordering criterion is reported
//! but not asserted.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obsflow::config::{ExperimentConfig, Preset, SweepConfig, TraceSource, WorkloadConfig};
use obsflow::report::write_run;
use obsflow::sweep::{run_sweep, Workload};
use obsflow::units::{ByteSize, Duration};
use obsflow_core::cache::{CacheStore, EvictionPolicy};
use obsflow_core::classifier::decompose_overlap;
use obsflow_core::placement::{select_hub, HubSelectionInputs, HubWeights};
use obsflow_core::prediction::{arima_fit_forecast, frequent_itemsets, ArimaOrder};
use obsflow_core::sim::{
    fifo_latencies, run, CacheConfig, NetworkCondition, SimConfig, SimReport, Strategy, Topology, ORIGIN_WORKERS,
};
use obsflow_core::trace::{scale_traffic, synthesize_trace, SyntheticTrace, WorkloadSpec};
use obsflow_core::{DtnId, Interval, IntervalSet, ObjectId};

use support::*;

const GB: u64 = 1_000_000_000;
const TB: u64 = 1_000 * GB;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Replay {
    trace: SyntheticTrace,
    topo: Topology,
}

impl Replay {
    fn new(spec: &WorkloadSpec) -> Self {
        let trace = synthesize_trace(spec).unwrap();
        let mut topo = Topology::default();
        topo.assign_regions(trace.users.iter().map(|u| (u.id, u.region)));
        Replay { trace, topo }
    }

    fn run(&self, strategy: Strategy, capacity: u64, policy: EvictionPolicy) -> SimReport {
        self.run_with(&self.trace.records, &self.topo, strategy, capacity, policy)
    }

    fn run_with(
        &self,
        records: &[obsflow_core::trace::AccessRecord],
        topo: &Topology,
        strategy: Strategy,
        capacity: u64,
        policy: EvictionPolicy,
    ) -> SimReport {
        let cfg = SimConfig::new(strategy, CacheConfig { capacity, policy });
        run(records, &self.trace.catalog, topo, &cfg).unwrap()
    }
}

fn c1_eviction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..1_000 {
        let n = rng.gen_range(1..=500);
        let objects = rng.gen_range(1..=6);
        let slots = rng.gen_range(1..=20);
        let ops: Vec<UnitOp> = (0..n).map(|_| (rng.gen_range(0..objects), rng.gen_range(0..slots))).collect();
        let capacity = rng.gen_range(1..=24);
        for policy in [EvictionPolicy::Lru, EvictionPolicy::Lfu] {
            if store_victims(&ops, capacity, policy) != reference_victims(&ops, capacity, policy) {
                mismatches += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(mismatches == 0 && secs < 10.0, format!("1000 traces x LRU/LFU, {mismatches} mismatches, {secs:.2}s"))
}

fn c2_mining() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Instant::now();
    let mut mismatches = 0;
    for _ in 0..200 {
        let items = rng.gen_range(1..=12u32);
        let n = rng.gen_range(0..=200);
        let tx: Vec<Vec<ObjectId>> = (0..n)
            .map(|_| {
                let len = rng.gen_range(0..=items.min(8));
                (0..len).map(|_| ObjectId(rng.gen_range(0..items))).collect()
            })
            .collect();
        let min_support = rng.gen_range(1..=12);
        if frequent_itemsets(&tx, min_support) != apriori_brute_force(&tx, min_support) {
            mismatches += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(mismatches == 0 && secs < 30.0, format!("200 transaction sets, {mismatches} mismatches, {secs:.2}s"))
}

fn c3_arima() -> Outcome {
    let mut worst: f64 = 0.0;
    for (c, x0) in [(0.0, 100.0), (5.0, 40.0), (-3.0, -25.0)] {
        let mut xs: Vec<f64> = vec![x0];
        for _ in 0..30 {
            xs.push(c + 0.5 * xs.last().unwrap());
        }
        let expected = c + 0.5 * xs.last().unwrap();
        let got = arima_fit_forecast(&xs, ArimaOrder::new(1, 0, 0)).map_err(|e| e.to_string())?;
        worst = worst.max((got - expected).abs());
    }
    let constant = arima_fit_forecast(&[3_600.0; 12], ArimaOrder::new(0, 1, 0)).map_err(|e| e.to_string())?;
    check(
        worst < 1e-6 && constant == 3_600.0,
        format!("AR(1) max error {worst:.2e}, d=1 constant forecast {constant}"),
    )
}

fn c4_hub() -> Outcome {
    let inputs = |p: [f64; 2], u: [f64; 2], f: [f64; 2]| {
        let m = |v: [f64; 2]| BTreeMap::from([(DtnId(1), v[0]), (DtnId(2), v[1])]);
        HubSelectionInputs { throughput_sum: m(p), availability: m(u), frequency: m(f), weights: HubWeights::default() }
    };
    let w = HubWeights::default();
    let both = [DtnId(1), DtnId(2)];
    let got = [
        select_hub(&both, &inputs([30.0, 10.0], [0.4, 0.4], [2.0, 2.0])),
        select_hub(&both, &inputs([1.0, 0.0], [0.0, 1.0], [0.0, 1.0])),
        select_hub(&[DtnId(2)], &inputs([1.0, 0.0], [0.0, 1.0], [0.0, 1.0])),
    ]
    .map(|r| r.ok());
    let want = [Some(DtnId(1)), Some(DtnId(1)), Some(DtnId(2))];
    let weights = (w.throughput, w.availability, w.frequency) == (0.6, 0.2, 0.2);
    check(got == want && weights, format!("hubs {got:?}, weights ({}, {}, {})", w.throughput, w.availability, w.frequency))
}

fn c5_partition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let iv = |rng: &mut ChaCha8Rng| {
        let s = rng.gen_range(0..1_000i64);
        Interval::new(s, s + rng.gen_range(1..200)).unwrap()
    };
    let mut bad = 0;
    for t in 0..10_000 {
        let prev = IntervalSet::from_intervals((0..rng.gen_range(0..8)).map(|_| iv(&mut rng)));
        let cur = iv(&mut rng);
        let rec = obsflow_core::trace::AccessRecord::new(0.0, obsflow_core::UserId(0), ObjectId(0), cur);
        let (fresh, dup) = decompose_overlap(&prev, &rec);
        if fresh.measure() + dup.measure() != cur.len() || !fresh.intersect(&dup).is_empty() {
            bad += 1;
        }
        let mut store = CacheStore::new(rng.gen_range(1..2_000), EvictionPolicy::Lru);
        for k in 0..rng.gen_range(0..8) {
            let _ = store.insert(ObjectId(rng.gen_range(0..2)), iv(&mut rng), 1.0, k as f64);
        }
        let res = store.lookup(ObjectId(rng.gen_range(0..2)), &cur, 1.0, t as f64);
        if res.hit.measure() + res.miss.measure() != cur.len() || !res.hit.intersect(&res.miss).is_empty() {
            bad += 1;
        }
    }
    check(bad == 0, format!("10000 decompositions and lookups, {bad} violations"))
}

/// Origin-request ordering, byte reduction and recall on the large trace.
struct Large {
    reports: BTreeMap<&'static str, SimReport>,
    records: usize,
    slowest: f64,
}

fn large_runs(replay: &Replay) -> Large {
    let mut reports = BTreeMap::new();
    let mut slowest: f64 = 0.0;
    for s in Strategy::ALL {
        let t = Instant::now();
        reports.insert(s.name(), replay.run(s, TB, EvictionPolicy::Lru));
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    Large { reports, records: replay.trace.records.len(), slowest }
}

fn c6_bytes(l: &Large) -> Outcome {
    let none = l.reports["NoCache"].bytes.origin;
    let cached = l.reports["CacheOnly"].bytes.origin;
    let cut = 1.0 - cached / none;
    check(
        cut >= 0.5 && l.records >= 1_000_000 && l.slowest < 300.0,
        format!("{} requests, CacheOnly cuts origin bytes by {:.1}%, slowest run {:.1}s", l.records, 100.0 * cut, l.slowest),
    )
}

fn c7_ordering(l: &Large) -> Outcome {
    let n = |s: &str| l.reports[s].normalized_origin_requests;
    let ordered = ["HPM", "MD2", "MD1", "CacheOnly", "NoCache"];
    let ok = ordered.windows(2).all(|w| n(w[0]) < n(w[1])) && n("NoCache") == 1.0;
    let row: Vec<String> = ordered.iter().map(|s| format!("{s} {:.4}", n(s))).collect();
    check(ok, row.join(" < "))
}

fn c8_recall(l: &Large) -> Outcome {
    let r = |s: &str| l.reports[s].recall.unwrap_or(0.0);
    let programs = Replay::new(&WorkloadSpec {
        n_users: 12,
        human_user_fraction: 0.0,
        program_volume_fraction: 1.0,
        jitter_fraction: 0.0,
        ..WorkloadSpec::ooi_like()
    });
    let pure = programs.run(Strategy::Hpm, 10 * TB, EvictionPolicy::Lru).recall.unwrap_or(0.0);
    check(
        r("HPM") > r("MD2") && r("MD2") > r("MD1") && pure >= 0.95,
        format!("HPM {:.3} > MD2 {:.3} > MD1 {:.3}; program-only HPM {pure:.3}", r("HPM"), r("MD2"), r("MD1")),
    )
}

fn c9_policy(replay: &Replay) -> Outcome {
    let smallest = Preset::OoiLike.cache_sizes()[0].0;
    let mut ok = true;
    let mut parts = Vec::new();
    for s in Strategy::ALL.into_iter().filter(|s| *s != Strategy::NoCache) {
        let lru = replay.run(s, smallest, EvictionPolicy::Lru).throughput_mean_mbps;
        let lfu = replay.run(s, smallest, EvictionPolicy::Lfu).throughput_mean_mbps;
        ok &= lru >= lfu;
        parts.push(format!("{} {lru:.0}/{lfu:.0}", s.name()));
    }
    check(ok, format!("LRU/LFU Mbps at {} GB: {}", smallest / GB, parts.join(", ")))
}

fn c10_queueing(replay: &Replay) -> Outcome {
    let scaled: Vec<_> = [0.5, 1.0, 4.0].iter().map(|&k| scale_traffic(&replay.trace.records, k).unwrap()).collect();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in Strategy::ALL {
        let lat: Vec<f64> = scaled
            .iter()
            .map(|recs| replay.run_with(recs, &replay.topo, s, 128 * GB, EvictionPolicy::Lru).latency_mean)
            .collect();
        ok &= lat.windows(2).all(|w| w[0] <= w[1]);
        parts.push(format!("{} {:.2e}/{:.2e}/{:.2e}", s.name(), lat[0], lat[1], lat[2]));
    }
    let hand = fifo_latencies(&[0.0; 11], &[1.0; 11], ORIGIN_WORKERS);
    let hand_ok = ORIGIN_WORKERS == 10 && hand[10] == 1.0 && hand[..10].iter().all(|l| *l == 0.0);
    check(ok && hand_ok, format!("mean wait s at x0.5/x1/x4: {}; 11th arrival waits {}", parts.join(", "), hand[10]))
}

fn c11_streaming() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1, 3, 10] {
        for period in [10, 60, 120] {
            let phases: Vec<f64> = (0..k).map(|u| (u as f64 * 0.37).fract()).collect();
            let out = drive_streams(k, period, &phases, 50);
            let bound = ((out.end - out.first_promotion) / period as f64).ceil() as u64;
            ok &= out.reads > 0 && out.reads <= bound;
            if period == 60 {
                parts.push(format!("k={k} {}<={bound}", out.reads));
            }
        }
    }
    check(ok, format!("origin reads vs ceil(T/period) at 60s: {}", parts.join(", ")))
}

fn c12_network(replay: &Replay) -> Outcome {
    let thr = |s, c| {
        let topo = replay.topo.clone().with_condition(c);
        replay.run_with(&replay.trace.records, &topo, s, 128 * GB, EvictionPolicy::Lru).throughput_mean_mbps
    };
    let (hb, hm) = (thr(Strategy::Hpm, NetworkCondition::Best), thr(Strategy::Hpm, NetworkCondition::Medium));
    let (nb, nm) = (thr(Strategy::NoCache, NetworkCondition::Best), thr(Strategy::NoCache, NetworkCondition::Medium));
    let hpm_drop = 1.0 - hm / hb;
    let none_drop = 1.0 - nm / nb;
    check(
        hpm_drop.abs() <= 0.05 && none_drop >= 0.3,
        format!("medium vs best: HPM {:+.1}%, NoCache {:+.1}%", -100.0 * hpm_drop, -100.0 * none_drop),
    )
}

fn c13_determinism() -> Outcome {
    let cfg = ExperimentConfig {
        seed: 13,
        trace: TraceSource::Synthetic(WorkloadConfig {
            n_users: Some(40),
            duration: Some(Duration(7 * 86_400)),
            ..WorkloadConfig::preset(Preset::OoiLike)
        }),
        sweep: SweepConfig::network_traffic(ByteSize(128 * GB)),
        ..ExperimentConfig::default()
    };
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    for (i, threads) in [1, 2].into_iter().enumerate() {
        let workload = Workload::prepare(&cfg).map_err(|e| e.to_string())?;
        let results = run_sweep(&cfg, &workload, threads, false, &|_, _| {}).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(i.to_string());
        std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
        write_run(&dir, &cfg, &results).map_err(|e| e.to_string())?;
        dirs.push(dir);
    }
    let files = |d: &Path| -> BTreeMap<String, Vec<u8>> {
        std::fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap())
            .map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()))
            .collect()
    };
    let (a, b) = (files(&dirs[0]), files(&dirs[1]));
    check(
        a == b && cfg.sweep.len() == 45 && a.len() > 2,
        format!("{} cells, {} report files, identical: {}", cfg.sweep.len(), a.len(), a == b),
    )
}

fn main() -> ExitCode {
    let mut failed_asserted = 0;
    let mut report = |id: &str, name: &str, asserted: bool, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                if asserted {
                    failed_asserted += 1;
                }
                ("FAIL", d)
            }
        };
        let note = if asserted || tag == "PASS" { "" } else { " (reported, not asserted)" };
        println!("{id:<4}{tag} {name}: {detail}{note}");
    };
    report("C1", "eviction oracle", true, c1_eviction());
    report("C2", "mining oracle", true, c2_mining());
    report("C3", "ARIMA sanity", true, c3_arima());
    report("C4", "hub hand cases", true, c4_hub());
    report("C5", "interval partition", true, c5_partition());

    let large = Replay::new(&WorkloadSpec { n_users: 200, duration: 45 * 86_400, ..WorkloadSpec::ooi_like() });
    let l = large_runs(&large);
    drop(large);
    report("C6", "caching cuts origin bytes", true, c6_bytes(&l));
    report("C7", "strategy ordering", false, c7_ordering(&l));
    report("C8", "recall ordering", true, c8_recall(&l));

    let medium = Replay::new(&WorkloadSpec::ooi_like());
    report("C9", "LRU vs LFU", true, c9_policy(&medium));
    report("C10", "queueing", true, c10_queueing(&medium));
    report("C11", "streaming dedup", true, c11_streaming());
    report("C12", "network resilience", true, c12_network(&medium));
    report("C13", "determinism", true, c13_determinism());

    if failed_asserted == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed_asserted} asserted criteria failed");
        ExitCode::FAILURE
    }
}
