//! Sweep expansion and execution.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use obsflow_core::cache::EvictionPolicy;
use obsflow_core::sim::{run_detailed, CacheConfig, NetworkCondition, SimConfig, SimOutcome, Strategy, Topology};
use obsflow_core::trace::{scale_traffic, synthesize_trace, AccessRecord, Catalog, UserProfile};
use obsflow_core::UserId;

use crate::config::{ExperimentConfig, TraceSource};
use crate::tracefile::{self, UserTable};
use crate::units::ByteSize;
use crate::Error;

/// A replayable trace with its topology, users already homed.
#[derive(Debug, Clone)]
pub struct Workload {
    pub catalog: Catalog,
    pub users: UserTable,
    pub records: Vec<AccessRecord>,
    pub topology: Topology,
    /// Generator-side user descriptions; empty for file traces.
    pub profiles: Vec<UserProfile>,
}

impl Workload {
    /// Synthesizes or loads the configured trace.
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self, Error> {
        let mut topology = cfg.topology.build();
        match &cfg.trace {
            TraceSource::Synthetic(w) => {
                let t = synthesize_trace(&w.resolve(cfg.seed))?;
                topology.assign_regions(t.users.iter().map(|u| (u.id, u.region)));
                Ok(Self {
                    catalog: t.catalog,
                    users: t.users.iter().map(|u| u.name.clone()).collect(),
                    records: t.records,
                    topology,
                    profiles: t.users,
                })
            }
            TraceSource::File(f) => {
                let t = tracefile::load(&f.path, &f.catalog, f.users.as_deref())?;
                topology.assign_regions(t.regions.iter().map(|(u, r)| (*u, *r)));
                Ok(Self { catalog: t.catalog, users: t.users, records: t.records, topology, profiles: Vec::new() })
            }
        }
    }

    pub fn regions(&self) -> BTreeMap<UserId, u32> {
        self.profiles.iter().map(|u| (u.id, u.region)).collect()
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub strategy: Strategy,
    pub cache: ByteSize,
    pub policy: EvictionPolicy,
    pub network: NetworkCondition,
    pub traffic: f64,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}/x{}",
            self.strategy, self.cache, self.policy, self.network, self.traffic
        )
    }
}

/// The sweep grid in report order: traffic, network, policy, cache size,
/// then strategy varies fastest.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let s = &cfg.sweep;
    let mut out = Vec::with_capacity(s.len());
    for &traffic in &s.traffic {
        for &network in &s.networks {
            for &policy in &s.policies {
                for &cache in &s.cache_sizes {
                    for &strategy in &s.strategies {
                        out.push(Cell { strategy, cache, policy, network, traffic });
                    }
                }
            }
        }
    }
    out
}

pub struct CellResult {
    pub cell: Cell,
    pub outcome: SimOutcome,
}

fn sim_config(cfg: &ExperimentConfig, cell: &Cell) -> SimConfig {
    SimConfig {
        strategy: cell.strategy,
        cache: CacheConfig { capacity: cell.cache.0, policy: cell.policy },
        prediction: cfg.prediction.clone(),
        streaming: cfg.streaming.clone(),
        placement: cfg.placement.clone(),
        workers: None,
        seed: cfg.seed,
    }
}

/// Runs one cell.
pub fn run_cell(cfg: &ExperimentConfig, workload: &Workload, cell: &Cell) -> Result<SimOutcome, Error> {
    let wrap = |source| Error::Cell { cell: cell.to_string(), source };
    let scaled;
    let records = if cell.traffic == 1.0 {
        &workload.records
    } else {
        scaled = scale_traffic(&workload.records, cell.traffic).map_err(wrap)?;
        &scaled
    };
    let topo = workload.topology.clone().with_condition(cell.network);
    run_detailed(records, &workload.catalog, &topo, &sim_config(cfg, cell)).map_err(wrap)
}

/// Runs every cell on up to `threads` workers. Results come back in cell
/// order; the first failing cell (in that order) aborts the sweep. Final
/// caches are dropped unless `keep_state` is set.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    workload: &Workload,
    threads: usize,
    keep_state: bool,
    progress: &(dyn Fn(usize, &Cell) + Sync),
) -> Result<Vec<CellResult>, Error> {
    let grid = cells(cfg);
    let slots: Vec<Mutex<Option<Result<SimOutcome, Error>>>> = grid.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let failed = AtomicUsize::new(usize::MAX);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= grid.len() || i > failed.load(Ordering::Relaxed) {
            break;
        }
        progress(i, &grid[i]);
        let mut res = run_cell(cfg, workload, &grid[i]);
        match &mut res {
            Ok(o) if !keep_state => o.caches.clear(),
            Ok(_) => {}
            Err(_) => {
                failed.fetch_min(i, Ordering::Relaxed);
            }
        }
        *slots[i].lock().unwrap() = Some(res);
    };
    let threads = threads.clamp(1, grid.len().max(1));
    if threads == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    let mut out = Vec::with_capacity(grid.len());
    for (cell, slot) in grid.into_iter().zip(slots) {
        match slot.into_inner().unwrap() {
            Some(Ok(outcome)) => out.push(CellResult { cell, outcome }),
            Some(Err(e)) => return Err(e),
            None => break,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SweepConfig;

    #[test]
    fn grid_cardinality() {
        let mut cfg = ExperimentConfig {
            sweep: SweepConfig {
                strategies: vec![Strategy::NoCache, Strategy::CacheOnly, Strategy::Hpm],
                cache_sizes: vec![ByteSize(1_000)],
                ..SweepConfig::default()
            },
            ..ExperimentConfig::default()
        };
        assert_eq!(cells(&cfg).len(), 3);
        cfg.sweep = SweepConfig::network_traffic(ByteSize(1_000));
        let grid = cells(&cfg);
        assert_eq!(grid.len(), 45);
        assert_eq!(grid[0].strategy, Strategy::NoCache);
        assert_eq!((grid[5].network, grid[5].traffic), (NetworkCondition::Medium, 0.5));
    }
}
