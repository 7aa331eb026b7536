use obsflow_core::cache::EvictionPolicy;
use obsflow_core::sim::{run, CacheConfig, SimConfig, SimReport, Strategy, Topology};
use obsflow_core::trace::{synthesize_trace, RequestMix, SyntheticTrace, WorkloadSpec};

const TB: u64 = 1_000_000_000_000;

fn setup(spec: &WorkloadSpec) -> (SyntheticTrace, Topology) {
    let trace = synthesize_trace(spec).unwrap();
    let mut topo = Topology::default();
    topo.assign_regions(trace.users.iter().map(|u| (u.id, u.region)));
    (trace, topo)
}

fn simulate(trace: &SyntheticTrace, topo: &Topology, strategy: Strategy, capacity: u64) -> SimReport {
    let cfg = SimConfig::new(strategy, CacheConfig { capacity, policy: EvictionPolicy::Lru });
    run(&trace.records, &trace.catalog, topo, &cfg).unwrap()
}

fn small_ooi() -> WorkloadSpec {
    WorkloadSpec { n_users: 40, duration: 10 * 86_400, rng_seed: 5, ..WorkloadSpec::ooi_like() }
}

fn programs_only(mix: RequestMix, days: i64) -> WorkloadSpec {
    WorkloadSpec {
        n_users: 12,
        human_user_fraction: 0.0,
        program_volume_fraction: 1.0,
        mix,
        duration: days * 86_400,
        jitter_fraction: 0.0,
        rng_seed: 3,
        ..WorkloadSpec::default()
    }
}

#[test]
fn replay_is_bit_identical() {
    let (trace, topo) = setup(&small_ooi());
    for strategy in [Strategy::CacheOnly, Strategy::Md1, Strategy::Hpm] {
        let a = simulate(&trace, &topo, strategy, TB);
        let b = simulate(&trace, &topo, strategy, TB);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}

#[test]
fn delivered_bytes_are_conserved_and_bounded() {
    let (trace, topo) = setup(&small_ooi());
    let requested: f64 = trace.records.iter().map(|r| trace.catalog.rate(r.object) * r.range.len() as f64).sum();
    for strategy in Strategy::ALL {
        let r = simulate(&trace, &topo, strategy, TB / 8);
        assert_eq!(r.requests as usize, trace.records.len());
        let delivered = r.bytes.total();
        assert!((delivered - requested).abs() <= 1e-9 * requested, "{strategy}: {delivered} vs {requested}");
        assert!(r.peak_in_service <= 10, "{strategy}");
        assert!(r.peak_port_load <= 1.0 + 1e-9, "{strategy}: {}", r.peak_port_load);
        assert!(r.origin_requests <= r.requests);
        if strategy == Strategy::NoCache {
            assert_eq!(r.normalized_origin_requests, 1.0);
            assert!((r.bytes.origin - requested).abs() <= 1e-9 * requested);
        }
        let p = r.prefetch;
        assert!(p.consumed + p.late + p.evicted + p.wrong <= p.prefetched * (1.0 + 1e-9) + 1.0, "{strategy}: {p:?}");
    }
}

#[test]
fn periodic_programs_are_prefetched_with_high_recall() {
    // rule-driven prefetches before the first pattern week are the only misses
    let spec = WorkloadSpec { n_users: 12, human_user_fraction: 0.0, program_volume_fraction: 1.0, jitter_fraction: 0.0, ..WorkloadSpec::ooi_like() };
    let (trace, topo) = setup(&spec);
    let r = simulate(&trace, &topo, Strategy::Hpm, 10 * TB);
    let recall = r.recall.expect("HPM prefetched nothing");
    assert!(recall >= 0.95, "recall {recall}");
}

#[test]
fn streaming_cuts_origin_requests_for_real_time_pollers() {
    let mix = RequestMix { regular: 0.0, real_time: 1.0, overlapping: 0.0 };
    let (trace, topo) = setup(&programs_only(mix, 2));
    let cache_only = simulate(&trace, &topo, Strategy::CacheOnly, TB);
    let hpm = simulate(&trace, &topo, Strategy::Hpm, TB);
    assert!(hpm.stream_subscriptions > 0);
    assert!(hpm.normalized_origin_requests < cache_only.normalized_origin_requests);
    // once subscribed, polls find the pushed data locally
    assert!(hpm.normalized_origin_requests < 0.05, "{}", hpm.normalized_origin_requests);
}
