//! Fair-share bandwidth model with progress-based transfer completion.
//!
//! Every DTN port is shared equally among the transfers using it, separately
//! per direction. A transfer runs at the smaller of its two port shares (and
//! never above the pairwise link), scaled by the network condition. Rates are
//! recomputed whenever a transfer starts or ends.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::{DtnId, Error, Result, Timestamp};

use super::Topology;

pub fn gbps_to_bytes_per_s(gbps: f64) -> f64 {
    gbps * 1e9 / 8.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub src: DtnId,
    pub dst: DtnId,
    pub bytes: f64,
    pub remaining: f64,
    /// Bytes per second.
    pub rate: f64,
    pub started: Timestamp,
}

#[derive(Debug, Clone)]
pub struct Network {
    link: Vec<Vec<f64>>,
    port: Vec<f64>,
    flows: BTreeMap<u64, Flow>,
    tx: Vec<u32>,
    rx: Vec<u32>,
    clock: Timestamp,
    next_id: u64,
}

impl Network {
    pub fn new(topo: &Topology) -> Self {
        let n = topo.dtns.len();
        Self {
            link: topo.bandwidth.iter().map(|r| r.iter().map(|b| gbps_to_bytes_per_s(b * topo.scale)).collect()).collect(),
            port: topo.dtns.iter().map(|d| gbps_to_bytes_per_s(topo.port(d.id) * topo.scale)).collect(),
            flows: BTreeMap::new(),
            tx: vec![0; n],
            rx: vec![0; n],
            clock: 0.0,
            next_id: 0,
        }
    }

    pub fn active(&self) -> usize {
        self.flows.len()
    }

    pub fn flow(&self, id: u64) -> Option<&Flow> {
        self.flows.get(&id)
    }

    fn share(&self, src: DtnId, dst: DtnId) -> f64 {
        let (s, d) = (src.index(), dst.index());
        let out = self.port[s] / self.tx[s].max(1) as f64;
        let inc = self.port[d] / self.rx[d].max(1) as f64;
        out.min(inc).min(self.link[s][d])
    }

    /// Current per-transfer throughput between two DTNs in Gbps, counting
    /// the transfers already active on their ports.
    pub fn effective_throughput(&self, src: DtnId, dst: DtnId) -> Result<f64> {
        if self.link.get(src.index()).and_then(|r| r.get(dst.index())).is_none_or(|b| *b <= 0.0) {
            return Err(Error::Disconnected(src, dst));
        }
        Ok(self.share(src, dst) * 8.0 / 1e9)
    }

    fn advance(&mut self, now: Timestamp) {
        let dt = now - self.clock;
        if dt > 0.0 {
            for f in self.flows.values_mut() {
                f.remaining = (f.remaining - f.rate * dt).max(0.0);
            }
            self.clock = now;
        }
    }

    fn recompute(&mut self) {
        let rates: Vec<(u64, f64)> = self.flows.iter().map(|(id, f)| (*id, self.share(f.src, f.dst))).collect();
        for (id, r) in rates {
            self.flows.get_mut(&id).unwrap().rate = r;
        }
    }

    pub fn start(&mut self, now: Timestamp, src: DtnId, dst: DtnId, bytes: f64) -> Result<u64> {
        if self.link.get(src.index()).and_then(|r| r.get(dst.index())).is_none_or(|b| *b <= 0.0) {
            return Err(Error::Disconnected(src, dst));
        }
        self.advance(now);
        let id = self.next_id;
        self.next_id += 1;
        self.tx[src.index()] += 1;
        self.rx[dst.index()] += 1;
        self.flows.insert(id, Flow { src, dst, bytes, remaining: bytes, rate: 0.0, started: now });
        self.recompute();
        Ok(id)
    }

    /// Earliest finishing transfer, ties to the lowest id.
    pub fn next_completion(&self) -> Option<(Timestamp, u64)> {
        self.flows
            .iter()
            .map(|(id, f)| (self.clock + f.remaining / f.rate, *id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    }

    /// Finishes transfer `id` at `now`, which must be its completion time.
    pub fn complete(&mut self, now: Timestamp, id: u64) -> Flow {
        self.advance(now);
        let mut f = self.flows.remove(&id).expect("unknown transfer");
        f.remaining = 0.0;
        self.tx[f.src.index()] -= 1;
        self.rx[f.dst.index()] -= 1;
        self.recompute();
        f
    }

    /// Largest total rate through any port direction, as a fraction of the
    /// port's scaled bandwidth.
    pub fn peak_port_load(&self) -> f64 {
        let n = self.port.len();
        let mut out = vec![0.0; n];
        let mut inc = vec![0.0; n];
        for f in self.flows.values() {
            out[f.src.index()] += f.rate;
            inc[f.dst.index()] += f.rate;
        }
        (0..n)
            .filter(|i| self.port[*i] > 0.0)
            .map(|i| out[i].max(inc[i]) / self.port[i])
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::NetworkCondition;

    #[test]
    fn lone_and_shared_transfers() {
        let topo = Topology::default();
        let mut net = Network::new(&topo);
        assert_eq!(net.effective_throughput(DtnId(0), DtnId(1)).unwrap(), 40.0);
        let a = net.start(0.0, DtnId(0), DtnId(1), 5e9).unwrap();
        assert_eq!(net.flow(a).unwrap().rate, 5e9);
        let b = net.start(0.0, DtnId(0), DtnId(2), 5e9).unwrap();
        assert_eq!(net.flow(a).unwrap().rate, 2.5e9);
        assert_eq!(net.flow(b).unwrap().rate, 2.5e9);
        assert!(net.peak_port_load() <= 1.0 + 1e-12);
        let (t, id) = net.next_completion().unwrap();
        assert_eq!((t, id), (2.0, a));
        net.complete(t, id);
        // b got 5 GB at 2.5 GB/s for 2 s: done at once
        assert_eq!(net.next_completion().unwrap(), (2.0, b));
    }

    #[test]
    fn progress_carries_over_rate_changes() {
        let mut net = Network::new(&Topology::default());
        let a = net.start(0.0, DtnId(0), DtnId(1), 10e9).unwrap();
        // 1 s alone at 5 GB/s, then shared
        net.start(1.0, DtnId(0), DtnId(2), 100e9).unwrap();
        let (t, id) = net.next_completion().unwrap();
        assert_eq!(id, a);
        assert!((t - 3.0).abs() < 1e-12, "{t}");
    }

    #[test]
    fn scaled_and_disconnected() {
        let net = Network::new(&Topology::default().with_condition(NetworkCondition::Worst));
        assert!((net.effective_throughput(DtnId(0), DtnId(1)).unwrap() - 0.4).abs() < 1e-12);
        assert!(net.effective_throughput(DtnId(1), DtnId(1)).is_err());
    }

    #[test]
    fn one_gigabyte_over_ten_gbps() {
        let mut net = Network::new(&Topology::default());
        net.start(0.0, DtnId(0), DtnId(6), 1e9).unwrap();
        assert!((net.next_completion().unwrap().0 - 0.8).abs() < 1e-12);
    }
}
