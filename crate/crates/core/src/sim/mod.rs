//! Discrete-event simulation of request delivery over the DTN network.

mod engine;
mod network;
mod queue;
mod report;
mod topology;

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::EvictionPolicy;
use crate::placement::PlacementConfig;
use crate::prediction::{Model, PredictionConfig};
use crate::streaming::StreamConfig;
use crate::{Error, Result};

pub use engine::{run, run_detailed, SimOutcome};
pub use network::{gbps_to_bytes_per_s, Flow, Network};
pub use queue::{fifo_latencies, OriginQueue, ORIGIN_WORKERS};
pub use report::{percentile, ByteSources, PrefetchStats, SimReport};
pub use topology::{
    Dtn, NetworkCondition, Role, Topology, ACCESS_LINK_GBPS, DEFAULT_CLIENT_PORTS, SERVER_PORT,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Every request goes to the origin.
    #[default]
    NoCache,
    /// DTN caches and peer lookup only.
    CacheOnly,
    /// Markov prefetching.
    Md1,
    /// Association-rule prefetching for every request.
    Md2,
    /// Hybrid prefetching.
    Hpm,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Self::NoCache, Self::CacheOnly, Self::Md1, Self::Md2, Self::Hpm];

    pub fn name(self) -> &'static str {
        match self {
            Self::NoCache => "NoCache",
            Self::CacheOnly => "CacheOnly",
            Self::Md1 => "MD1",
            Self::Md2 => "MD2",
            Self::Hpm => "HPM",
        }
    }

    pub fn caches(self) -> bool {
        self != Self::NoCache
    }

    pub fn model(self) -> Option<Model> {
        match self {
            Self::Md1 => Some(Model::Markov),
            Self::Md2 => Some(Model::UniformMining),
            Self::Hpm => Some(Model::Hybrid),
            _ => None,
        }
    }

    /// Streaming and placement come with every prefetching strategy.
    pub fn streams(self) -> bool {
        self.model().is_some()
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    /// Per client DTN, bytes.
    pub capacity: u64,
    pub policy: EvictionPolicy,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self { capacity: 1_000_000_000_000, policy: EvictionPolicy::Lru }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub strategy: Strategy,
    pub cache: CacheConfig,
    pub prediction: PredictionConfig,
    pub streaming: StreamConfig,
    pub placement: PlacementConfig,
    pub workers: Option<usize>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(strategy: Strategy, cache: CacheConfig) -> Self {
        Self { strategy, cache, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.strategy.caches() && self.cache.capacity == 0 {
            return Err(Error::InvalidConfig("cache capacity must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("the origin needs at least one worker".into()));
        }
        if !(self.placement.epoch > 0.0) || !(0.0..=1.0).contains(&self.placement.budget_fraction) {
            return Err(Error::InvalidConfig("placement epoch must be positive and budget a fraction".into()));
        }
        self.prediction.validate()
    }
}
