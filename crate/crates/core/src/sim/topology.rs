//! DTN topology: one origin-side server DTN and a set of client DTNs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{DtnId, Error, Result, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Server,
    Client,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dtn {
    pub id: DtnId,
    pub role: Role,
}

/// Bandwidth scale applied to every DTN port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NetworkCondition {
    Best,
    Medium,
    Worst,
}

impl NetworkCondition {
    pub const ALL: [NetworkCondition; 3] = [Self::Best, Self::Medium, Self::Worst];

    pub fn scale(self) -> f64 {
        match self {
            Self::Best => 1.0,
            Self::Medium => 0.5,
            Self::Worst => 0.01,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Best => "best",
            Self::Medium => "medium",
            Self::Worst => "worst",
        }
    }
}

impl core::fmt::Display for NetworkCondition {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for NetworkCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidTopology(alloc::format!("unknown network condition {s:?}")))
    }
}

pub const DEFAULT_CLIENT_PORTS: [f64; 6] = [40.0, 35.0, 30.0, 20.0, 15.0, 10.0];
pub const SERVER_PORT: f64 = 40.0;
pub const ACCESS_LINK_GBPS: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    /// Ids are positions in this list.
    pub dtns: Vec<Dtn>,
    /// Unscaled Gbps; zero means not connected.
    pub bandwidth: Vec<Vec<f64>>,
    pub homes: BTreeMap<UserId, DtnId>,
    /// User-to-DTN link, Gbps. Not affected by the network condition.
    pub access_gbps: f64,
    pub scale: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self::from_ports(SERVER_PORT, &DEFAULT_CLIENT_PORTS)
    }
}

impl Topology {
    /// Server DTN 0 plus one client per port speed; pairwise bandwidth is the
    /// slower of the two ports.
    pub fn from_ports(server_port: f64, client_ports: &[f64]) -> Self {
        let mut ports = Vec::with_capacity(client_ports.len() + 1);
        ports.push(server_port);
        ports.extend_from_slice(client_ports);
        let dtns = (0..ports.len())
            .map(|i| Dtn { id: DtnId(i as u32), role: if i == 0 { Role::Server } else { Role::Client } })
            .collect();
        let bandwidth = ports
            .iter()
            .enumerate()
            .map(|(i, a)| ports.iter().enumerate().map(|(j, b)| if i == j { 0.0 } else { a.min(*b) }).collect())
            .collect();
        Self { dtns, bandwidth, homes: BTreeMap::new(), access_gbps: ACCESS_LINK_GBPS, scale: 1.0 }
    }

    pub fn with_condition(mut self, condition: NetworkCondition) -> Self {
        self.scale = condition.scale();
        self
    }

    pub fn server(&self) -> DtnId {
        self.dtns.iter().find(|d| d.role == Role::Server).map(|d| d.id).unwrap_or(DtnId(0))
    }

    pub fn clients(&self) -> Vec<DtnId> {
        self.dtns.iter().filter(|d| d.role == Role::Client).map(|d| d.id).collect()
    }

    /// Home DTN of a user; users without an assignment are spread over the
    /// clients by id.
    pub fn home(&self, user: UserId) -> DtnId {
        if let Some(d) = self.homes.get(&user) {
            return *d;
        }
        let clients = self.clients();
        clients[user.index() % clients.len()]
    }

    /// Assigns users of region `r` to the `r`-th client DTN (modulo count).
    pub fn assign_regions<I: IntoIterator<Item = (UserId, u32)>>(&mut self, users: I) {
        let clients = self.clients();
        for (u, r) in users {
            self.homes.insert(u, clients[r as usize % clients.len()]);
        }
    }

    /// Unscaled bandwidth of a DTN's port: its fastest link.
    pub fn port(&self, d: DtnId) -> f64 {
        self.bandwidth[d.index()].iter().copied().fold(0.0, f64::max)
    }

    /// Nominal scaled throughput between two DTNs, Gbps.
    pub fn throughput(&self, src: DtnId, dst: DtnId) -> f64 {
        self.bandwidth[src.index()][dst.index()] * self.scale
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dtns.len();
        let bad = |m: alloc::string::String| Err(Error::InvalidTopology(m));
        if self.dtns.iter().filter(|d| d.role == Role::Server).count() != 1 {
            return bad("exactly one server DTN is required".into());
        }
        if self.clients().is_empty() {
            return bad("at least one client DTN is required".into());
        }
        if self.dtns.iter().enumerate().any(|(i, d)| d.id.index() != i) {
            return bad("DTN ids must match their positions".into());
        }
        if self.bandwidth.len() != n || self.bandwidth.iter().any(|row| row.len() != n) {
            return bad(format!("bandwidth matrix must be {n}x{n}"));
        }
        for i in 0..n {
            for j in 0..n {
                let b = self.bandwidth[i][j];
                if !(b.is_finite() && b >= 0.0) || b != self.bandwidth[j][i] {
                    return bad(format!("bandwidth[{i}][{j}] must be finite, non-negative and symmetric"));
                }
            }
        }
        let server = self.server();
        for c in self.clients() {
            if self.bandwidth[server.index()][c.index()] <= 0.0 {
                return Err(Error::Disconnected(server, c));
            }
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidScale(self.scale));
        }
        if !(self.access_gbps > 0.0) {
            return bad("access link bandwidth must be positive".into());
        }
        if let Some((u, d)) = self.homes.iter().find(|(_, d)| self.dtns.get(d.index()).is_none_or(|x| x.role != Role::Client)) {
            return bad(format!("user {u} is homed at {d}, which is not a client DTN"));
        }
        Ok(())
    }
}
