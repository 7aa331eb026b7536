//! Experiment configuration files.
//!
//! ```toml
//! seed = 7
//! out_dir = "runs"
//!
//! [trace.synthetic]
//! preset = "ooi-like"
//! n_users = 200
//! duration = "30 d"
//!
//! [sweep]
//! strategies = ["NoCache", "CacheOnly", "MD1", "MD2", "HPM"]
//! cache_sizes = ["128 GB", "1 TB"]
//! policies = ["lru"]
//! networks = ["best", "medium", "worst"]
//! traffic = [0.5, 1.0, 4.0]
//! ```
//!
//! Model parameters (`[prediction]`, `[streaming]`, `[placement]`) use the
//! core crate's field names; their durations are plain seconds.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use obsflow_core::cache::EvictionPolicy;
use obsflow_core::placement::PlacementConfig;
use obsflow_core::prediction::PredictionConfig;
use obsflow_core::sim::{NetworkCondition, Strategy, Topology, ACCESS_LINK_GBPS, DEFAULT_CLIENT_PORTS, SERVER_PORT};
use obsflow_core::streaming::StreamConfig;
use obsflow_core::trace::{PollShape, RequestMix, WorkloadSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::units::{Bandwidth, ByteSize, Duration};
use crate::Error;

/// Named calibration targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    OoiLike,
    GageLike,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::OoiLike => "ooi-like",
            Preset::GageLike => "gage-like",
        }
    }

    pub fn workload(self) -> WorkloadSpec {
        match self {
            Preset::OoiLike => WorkloadSpec::ooi_like(),
            Preset::GageLike => WorkloadSpec::gage_like(),
        }
    }

    /// Cache sizes swept for this preset.
    pub fn cache_sizes(self) -> Vec<ByteSize> {
        let gb = |n: u64| ByteSize(n * 1_000_000_000);
        match self {
            Preset::OoiLike => vec![gb(128), gb(256), gb(512), gb(1_000), gb(10_000)],
            Preset::GageLike => vec![gb(32), gb(64), gb(128), gb(256), gb(10_000)],
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "ooi-like" | "ooi" => Ok(Preset::OoiLike),
            "gage-like" | "gage" => Ok(Preset::GageLike),
            _ => Err(Error::Config(format!("unknown preset {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PollShapeConfig {
    pub period: Duration,
    pub window: Duration,
}

/// A [`WorkloadSpec`] as written in a config file: an optional preset plus
/// field overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub preset: Option<Preset>,
    pub n_users: Option<u32>,
    pub human_user_fraction: Option<f64>,
    pub program_volume_fraction: Option<f64>,
    pub mix: Option<RequestMix>,
    pub overlap_duplicate_fraction: Option<f64>,
    pub duration: Option<Duration>,
    pub catalog_size: Option<u32>,
    pub spatial_correlation: Option<f64>,
    /// Overrides the experiment seed for trace synthesis.
    pub seed: Option<u64>,
    pub jitter_fraction: Option<f64>,
    /// Bytes per second of observation time.
    pub mean_data_rate: Option<f64>,
    pub regions: Option<u32>,
    pub regular: Option<PollShapeConfig>,
    pub real_time: Option<PollShapeConfig>,
    pub overlapping: Option<PollShapeConfig>,
}

impl WorkloadConfig {
    pub fn preset(preset: Preset) -> Self {
        Self { preset: Some(preset), ..Default::default() }
    }

    /// The spec this config describes; `seed` applies unless overridden.
    pub fn resolve(&self, seed: u64) -> WorkloadSpec {
        let mut s = self.preset.map(Preset::workload).unwrap_or_default();
        let shape = |c: PollShapeConfig| PollShape { period: c.period.0, window: c.window.0 };
        s.rng_seed = self.seed.unwrap_or(seed);
        if let Some(v) = self.n_users {
            s.n_users = v;
        }
        if let Some(v) = self.human_user_fraction {
            s.human_user_fraction = v;
        }
        if let Some(v) = self.program_volume_fraction {
            s.program_volume_fraction = v;
        }
        if let Some(v) = self.mix {
            s.mix = v;
        }
        if let Some(v) = self.overlap_duplicate_fraction {
            s.overlap_duplicate_fraction = Some(v);
        }
        if let Some(v) = self.duration {
            s.duration = v.0;
        }
        if let Some(v) = self.catalog_size {
            s.catalog_size = v;
        }
        if let Some(v) = self.spatial_correlation {
            s.spatial_correlation = v;
        }
        if let Some(v) = self.jitter_fraction {
            s.jitter_fraction = v;
        }
        if let Some(v) = self.mean_data_rate {
            s.mean_data_rate = v;
        }
        if let Some(v) = self.regions {
            s.n_regions = v;
        }
        if let Some(v) = self.regular {
            s.regular = shape(v);
        }
        if let Some(v) = self.real_time {
            s.real_time = shape(v);
        }
        if let Some(v) = self.overlapping {
            s.overlapping = shape(v);
        }
        s
    }
}

/// Paths of a trace on disk, relative to the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFileConfig {
    pub path: PathBuf,
    pub catalog: PathBuf,
    pub users: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSource {
    Synthetic(WorkloadConfig),
    File(TraceFileConfig),
}

impl Default for TraceSource {
    fn default() -> Self {
        TraceSource::Synthetic(WorkloadConfig::preset(Preset::OoiLike))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub server_port: Bandwidth,
    /// One client DTN per entry; users of region `r` use client `r mod n`.
    pub client_ports: Vec<Bandwidth>,
    pub access_link: Bandwidth,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            server_port: Bandwidth(SERVER_PORT),
            client_ports: DEFAULT_CLIENT_PORTS.iter().map(|g| Bandwidth(*g)).collect(),
            access_link: Bandwidth(ACCESS_LINK_GBPS),
        }
    }
}

impl TopologyConfig {
    pub fn build(&self) -> Topology {
        let ports: Vec<f64> = self.client_ports.iter().map(|b| b.0).collect();
        let mut t = Topology::from_ports(self.server_port.0, &ports);
        t.access_gbps = self.access_link.0;
        t
    }
}

/// Serializes enum lists through their display names.
mod named {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(items: &[T], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(items.iter().map(ToString::to_string))
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Vec<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(with = "named")]
    pub strategies: Vec<Strategy>,
    pub cache_sizes: Vec<ByteSize>,
    #[serde(with = "named")]
    pub policies: Vec<EvictionPolicy>,
    #[serde(with = "named")]
    pub networks: Vec<NetworkCondition>,
    /// Request-rate multipliers; 4 packs the trace into a quarter of its span.
    pub traffic: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            cache_sizes: Preset::OoiLike.cache_sizes(),
            policies: vec![EvictionPolicy::Lru],
            networks: vec![NetworkCondition::Best],
            traffic: vec![1.0],
        }
    }
}

impl SweepConfig {
    /// Every network condition at every traffic level for each strategy.
    pub fn network_traffic(cache: ByteSize) -> Self {
        Self {
            cache_sizes: vec![cache],
            networks: NetworkCondition::ALL.to_vec(),
            traffic: vec![0.5, 1.0, 4.0],
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.strategies.len() * self.cache_sizes.len() * self.policies.len() * self.networks.len() * self.traffic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub trace: TraceSource,
    pub topology: TopologyConfig,
    pub sweep: SweepConfig,
    pub prediction: PredictionConfig,
    pub streaming: StreamConfig,
    pub placement: PlacementConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out_dir: PathBuf::from("runs"),
            trace: TraceSource::default(),
            topology: TopologyConfig::default(),
            sweep: SweepConfig::default(),
            prediction: PredictionConfig::default(),
            streaming: StreamConfig::default(),
            placement: PlacementConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Cache-size sweep of every strategy on a preset workload.
    pub fn preset(preset: Preset) -> Self {
        Self {
            trace: TraceSource::Synthetic(WorkloadConfig::preset(preset)),
            sweep: SweepConfig { cache_sizes: preset.cache_sizes(), ..SweepConfig::default() },
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, Error> {
        Ok(toml::to_string(self)?)
    }

    /// Reads a config file; relative trace paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Path(path.to_path_buf(), e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.in_file(path))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let TraceSource::File(f) = &mut cfg.trace {
            for p in [Some(&mut f.path), Some(&mut f.catalog), f.users.as_mut()].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let s = &self.sweep;
        let empty = [
            ("strategies", s.strategies.is_empty()),
            ("cache_sizes", s.cache_sizes.is_empty()),
            ("policies", s.policies.is_empty()),
            ("networks", s.networks.is_empty()),
            ("traffic", s.traffic.is_empty()),
        ];
        if let Some((axis, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::Config(format!("sweep axis {axis} is empty")));
        }
        if s.cache_sizes.iter().any(|c| c.0 == 0) {
            return Err(Error::Config("cache sizes must be positive".into()));
        }
        if s.traffic.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::Config("traffic factors must be positive".into()));
        }
        if self.topology.client_ports.is_empty() {
            return Err(Error::Config("the topology needs at least one client DTN".into()));
        }
        if let TraceSource::Synthetic(w) = &self.trace {
            w.resolve(self.seed).validate()?;
        }
        self.prediction.validate()?;
        self.topology.build().validate()?;
        Ok(())
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String, Error> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}
