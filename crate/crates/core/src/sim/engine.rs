//! The event loop.
//!
//! Three sources feed it: network transfer completions, scheduled events
//! (prefetch firings, stream ticks, rebalances) and trace requests. At equal
//! times they are handled in that order; scheduled events among themselves
//! follow their insertion sequence.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use crate::cache::{peer_lookup, CacheStore, PeerView};
use crate::placement::{rebalance, replicate_hot, Placement, RebalanceInputs};
use crate::prediction::{Model, PredictionEngine, PrefetchPlan, RuleSet};
use crate::streaming::{StreamEvent, StreamServer};
use crate::trace::{AccessRecord, Catalog};
use crate::{DtnId, Error, IntervalSet, ObjectId, Result, Timestamp, UserId};

use super::report::{mean, percentile, sorted};
use super::{Network, OriginQueue, SimConfig, SimReport, Topology, ORIGIN_WORKERS};

enum Kind {
    Prefetch(PrefetchPlan),
    Tick(ObjectId),
    Rebalance,
}

struct Scheduled {
    at: Timestamp,
    seq: u64,
    kind: Kind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at).then(self.seq.cmp(&other.seq))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Inbound {
    Demand,
    Prefetch,
    Stream,
    Replica,
}

enum Purpose {
    /// Part of request `req`; `origin` marks the queued origin read.
    Demand { origin: bool },
    Prefetch { late: IntervalSet },
    Stream,
    Replica,
}

struct Transfer {
    purpose: Purpose,
    dst: DtnId,
    object: ObjectId,
    set: IntervalSet,
    waiters: Vec<usize>,
}

struct Request {
    submit: Timestamp,
    bytes: f64,
    outstanding: u32,
    done_at: Timestamp,
}

struct OriginTask {
    req: usize,
    dst: DtnId,
    object: ObjectId,
    set: IntervalSet,
}

#[derive(Default)]
struct Provenance {
    /// Prefetched ranges nobody has read yet.
    prefetched: BTreeMap<ObjectId, IntervalSet>,
    /// Ranges that arrived through a stream.
    streamed: BTreeMap<ObjectId, IntervalSet>,
    inbound: BTreeMap<ObjectId, Vec<(u64, Inbound)>>,
}

fn take(map: &mut BTreeMap<ObjectId, IntervalSet>, object: ObjectId, part: &IntervalSet) -> IntervalSet {
    let Some(set) = map.get_mut(&object) else {
        return IntervalSet::new();
    };
    let got = set.intersect(part);
    if !got.is_empty() {
        *set = set.difference(&got);
        if set.is_empty() {
            map.remove(&object);
        }
    }
    got
}

struct Sim<'a> {
    cfg: &'a SimConfig,
    catalog: &'a Catalog,
    topo: &'a Topology,
    server: DtnId,
    clients: Vec<DtnId>,
    net: Network,
    queue: OriginQueue<OriginTask>,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    caches: BTreeMap<DtnId, CacheStore>,
    prov: BTreeMap<DtnId, Provenance>,
    transfers: BTreeMap<u64, Transfer>,
    requests: Vec<Request>,
    predictor: Option<PredictionEngine>,
    streams: Option<StreamServer>,
    last_ts: BTreeMap<(UserId, ObjectId), Timestamp>,
    window: Vec<AccessRecord>,
    hubs: BTreeMap<UserId, DtnId>,
    placement: Option<Placement>,
    report: SimReport,
    latencies: Vec<f64>,
    throughputs: Vec<f64>,
    busy_time: f64,
    now: Timestamp,
}

impl<'a> Sim<'a> {
    fn schedule(&mut self, at: Timestamp, kind: Kind) {
        self.seq += 1;
        self.heap.push(Reverse(Scheduled { at, seq: self.seq, kind }));
    }

    fn rate(&self, object: ObjectId) -> f64 {
        self.catalog.rate(object)
    }

    fn set_bytes(&self, object: ObjectId, set: &IntervalSet) -> f64 {
        self.rate(object) * set.measure() as f64
    }

    fn start_transfer(&mut self, src: DtnId, dst: DtnId, object: ObjectId, set: IntervalSet, purpose: Purpose) -> Result<u64> {
        let bytes = self.set_bytes(object, &set);
        let id = self.net.start(self.now, src, dst, bytes)?;
        if src == self.server {
            self.report.server_bytes += bytes;
        }
        let inbound = match purpose {
            Purpose::Demand { .. } => Inbound::Demand,
            Purpose::Prefetch { .. } => Inbound::Prefetch,
            Purpose::Stream => Inbound::Stream,
            Purpose::Replica => Inbound::Replica,
        };
        if self.cfg.strategy.caches() {
            self.prov.entry(dst).or_default().inbound.entry(object).or_default().push((id, inbound));
        }
        self.transfers.insert(id, Transfer { purpose, dst, object, set, waiters: Vec::new() });
        Ok(id)
    }

    fn inbound_union(&self, dst: DtnId, object: ObjectId) -> IntervalSet {
        let mut all = IntervalSet::new();
        if let Some(list) = self.prov.get(&dst).and_then(|p| p.inbound.get(&object)) {
            for (id, _) in list {
                all = all.union(&self.transfers[id].set);
            }
        }
        all
    }

    fn insert(&mut self, dst: DtnId, object: ObjectId, set: &IntervalSet) {
        let rate = self.rate(object);
        let now = self.now;
        let Some(cache) = self.caches.get_mut(&dst) else {
            return;
        };
        let mut evicted = Vec::new();
        for iv in set.iter() {
            if let Ok(mut ev) = cache.insert(object, *iv, rate, now) {
                evicted.append(&mut ev);
            }
        }
        let prov = self.prov.entry(dst).or_default();
        for (obj, iv) in evicted {
            let part = IntervalSet::from_interval(iv);
            let lost = take(&mut prov.prefetched, obj, &part);
            self.report.prefetch.evicted += self.catalog.rate(obj) * lost.measure() as f64;
            take(&mut prov.streamed, obj, &part);
        }
    }

    fn finish_request(&mut self, req: usize) {
        let r = &self.requests[req];
        let dur = r.done_at - r.submit;
        if dur > 0.0 {
            self.throughputs.push(r.bytes * 8.0 / 1e6 / dur);
            self.busy_time += dur;
        }
    }

    fn start_origin(&mut self, task: OriginTask) -> Result<()> {
        let wait = self.now - self.requests[task.req].submit;
        self.latencies.push(wait);
        let id = self.start_transfer(self.server, task.dst, task.object, task.set, Purpose::Demand { origin: true })?;
        self.transfers.get_mut(&id).unwrap().waiters.push(task.req);
        Ok(())
    }

    fn on_request(&mut self, rec: &AccessRecord) -> Result<()> {
        let req = self.requests.len();
        let rate = self.rate(rec.object);
        let bytes = rate * rec.range.len() as f64;
        self.requests.push(Request { submit: rec.ts, bytes, outstanding: 0, done_at: rec.ts });
        self.report.requests += 1;
        let dtn = self.topo.home(rec.user);
        let whole = IntervalSet::from_interval(rec.range);

        if !self.cfg.strategy.caches() {
            self.report.bytes.origin += bytes;
            self.report.origin_requests += 1;
            self.requests[req].outstanding = 1;
            let task = OriginTask { req, dst: dtn, object: rec.object, set: whole };
            if let Some(task) = self.queue.submit(task) {
                self.start_origin(task)?;
            }
            return Ok(());
        }

        let prev_ts = self.last_ts.insert((rec.user, rec.object), rec.ts);
        if let Some(engine) = self.predictor.as_mut() {
            let obs = engine.observe(rec);
            self.report.prefetch.plans += obs.plans.len() as u64;
            for plan in obs.plans {
                self.schedule(plan.fire_at, Kind::Prefetch(plan));
            }
            if let Some(streams) = self.streams.as_mut() {
                if let StreamEvent::Schedule(object, at) = streams.observe(rec, obs.class, prev_ts, dtn) {
                    self.report.stream_subscriptions += 1;
                    self.schedule(at, Kind::Tick(object));
                }
            }
        }
        if self.cfg.placement_enabled() {
            self.window.push(*rec);
        }

        // local cache
        let lookup = self.caches.get_mut(&dtn).unwrap().lookup(rec.object, &rec.range, rate, rec.ts);
        let prov = self.prov.entry(dtn).or_default();
        let from_prefetch = take(&mut prov.prefetched, rec.object, &lookup.hit);
        let rest = lookup.hit.difference(&from_prefetch);
        let from_stream = prov.streamed.get(&rec.object).map(|s| s.intersect(&rest)).unwrap_or_default();
        let pf_bytes = rate * from_prefetch.measure() as f64;
        self.report.prefetch.consumed += pf_bytes;
        self.report.bytes.prefetch += pf_bytes;
        self.report.bytes.stream += rate * from_stream.measure() as f64;
        self.report.bytes.local += rate * (rest.measure() - from_stream.measure()) as f64;
        let hit_bytes = rate * lookup.hit.measure() as f64;
        if hit_bytes > 0.0 {
            self.requests[req].done_at = rec.ts + hit_bytes * 8.0 / (self.topo.access_gbps * 1e9);
        }

        let mut miss = lookup.miss;
        if miss.is_empty() {
            self.finish_request(req);
            return Ok(());
        }

        // wait for stream pushes already on their way; note prefetches
        // that will arrive too late
        let inbound: Vec<(u64, Inbound)> =
            self.prov.get(&dtn).and_then(|p| p.inbound.get(&rec.object)).cloned().unwrap_or_default();
        for (id, kind) in inbound {
            let t = self.transfers.get_mut(&id).unwrap();
            let part = t.set.intersect(&miss);
            if part.is_empty() {
                continue;
            }
            match (kind, &mut t.purpose) {
                (Inbound::Stream, _) => {
                    t.waiters.push(req);
                    self.requests[req].outstanding += 1;
                    self.report.bytes.stream += rate * part.measure() as f64;
                    miss = miss.difference(&part);
                }
                (Inbound::Prefetch, Purpose::Prefetch { late }) => *late = late.union(&part),
                _ => {}
            }
        }

        if !miss.is_empty() {
            let origin_tp = self.topo.throughput(self.server, dtn);
            let plan = {
                let peers: Vec<PeerView<'_>> = self
                    .clients
                    .iter()
                    .filter(|&&d| d != dtn)
                    .map(|&d| PeerView { dtn: d, store: &self.caches[&d], throughput: self.topo.throughput(d, dtn) })
                    .collect();
                peer_lookup(rec.object, &miss, &peers, origin_tp)
            };
            for (peer, part) in plan.from_peers {
                let cache = self.caches.get_mut(&peer).unwrap();
                for iv in part.iter() {
                    cache.touch(rec.object, iv, rec.ts);
                }
                self.report.bytes.peer += rate * part.measure() as f64;
                let id = self.start_transfer(peer, dtn, rec.object, part, Purpose::Demand { origin: false })?;
                self.transfers.get_mut(&id).unwrap().waiters.push(req);
                self.requests[req].outstanding += 1;
            }
            if !plan.origin.is_empty() {
                self.report.bytes.origin += rate * plan.origin.measure() as f64;
                self.report.origin_requests += 1;
                self.requests[req].outstanding += 1;
                let task = OriginTask { req, dst: dtn, object: rec.object, set: plan.origin };
                if let Some(task) = self.queue.submit(task) {
                    self.start_origin(task)?;
                }
            }
        }
        if self.requests[req].outstanding == 0 {
            self.finish_request(req);
        }
        Ok(())
    }

    fn on_transfer_done(&mut self, id: u64) -> Result<()> {
        self.net.complete(self.now, id);
        let t = self.transfers.remove(&id).unwrap();
        if let Some(list) = self.prov.get_mut(&t.dst).and_then(|p| p.inbound.get_mut(&t.object)) {
            list.retain(|(x, _)| *x != id);
            if list.is_empty() {
                self.prov.get_mut(&t.dst).unwrap().inbound.remove(&t.object);
            }
        }
        let rate = self.rate(t.object);
        match &t.purpose {
            Purpose::Demand { origin } => {
                if *origin {
                    if let Some(next) = self.queue.release() {
                        self.start_origin(next)?;
                    }
                }
                if self.cfg.strategy.caches() {
                    self.insert(t.dst, t.object, &t.set);
                }
            }
            Purpose::Prefetch { late } => {
                let cached = self.caches[&t.dst].holdings(t.object).intersect(&t.set);
                let wasted = late.union(&cached).intersect(&t.set);
                self.report.prefetch.late += rate * wasted.measure() as f64;
                let fresh = t.set.difference(&wasted);
                self.insert(t.dst, t.object, &t.set);
                if !fresh.is_empty() {
                    let prov = self.prov.entry(t.dst).or_default();
                    let e = prov.prefetched.entry(t.object).or_default();
                    *e = e.union(&fresh);
                }
            }
            Purpose::Stream => {
                self.insert(t.dst, t.object, &t.set);
                let prov = self.prov.entry(t.dst).or_default();
                let e = prov.streamed.entry(t.object).or_default();
                *e = e.union(&t.set);
            }
            Purpose::Replica => self.insert(t.dst, t.object, &t.set),
        }
        for req in t.waiters {
            let r = &mut self.requests[req];
            r.outstanding -= 1;
            r.done_at = r.done_at.max(self.now);
            if r.outstanding == 0 {
                self.finish_request(req);
            }
        }
        Ok(())
    }

    fn on_prefetch(&mut self, plan: PrefetchPlan) -> Result<()> {
        let dtn = self.topo.home(plan.user);
        let have = self.caches[&dtn].peek(plan.object, &plan.range);
        let missing = IntervalSet::from_interval(plan.range)
            .difference(&have)
            .difference(&self.inbound_union(dtn, plan.object));
        if missing.is_empty() {
            return Ok(());
        }
        let origin_tp = self.topo.throughput(self.server, dtn);
        let lookup = {
            let peers: Vec<PeerView<'_>> = self
                .clients
                .iter()
                .filter(|&&d| d != dtn)
                .map(|&d| PeerView { dtn: d, store: &self.caches[&d], throughput: self.topo.throughput(d, dtn) })
                .collect();
            peer_lookup(plan.object, &missing, &peers, origin_tp)
        };
        let mut parts = lookup.from_peers;
        if !lookup.origin.is_empty() {
            parts.push((self.server, lookup.origin));
        }
        for (src, part) in parts {
            self.report.prefetch.prefetched += self.set_bytes(plan.object, &part);
            self.report.prefetch.transfers += 1;
            self.start_transfer(src, dtn, plan.object, part, Purpose::Prefetch { late: IntervalSet::new() })?;
        }
        Ok(())
    }

    fn on_tick(&mut self, object: ObjectId) -> Result<()> {
        let Some(streams) = self.streams.as_mut() else {
            return Ok(());
        };
        let out = streams.tick(object, self.now);
        if let Some(push) = out.push {
            self.report.stream_reads += 1;
            let set = IntervalSet::from_interval(push.range);
            for dtn in push.dtns {
                self.start_transfer(self.server, dtn, object, set.clone(), Purpose::Stream)?;
            }
        }
        if let Some(at) = out.next_tick {
            self.schedule(at, Kind::Tick(object));
        }
        Ok(())
    }

    fn on_rebalance(&mut self, last_request: Timestamp) -> Result<()> {
        let epoch = self.cfg.placement.epoch;
        let window = core::mem::take(&mut self.window);
        let mut homes: BTreeMap<UserId, DtnId> = BTreeMap::new();
        for r in &window {
            homes.insert(r.user, self.topo.home(r.user));
        }
        let k = self.cfg.placement.k.unwrap_or(self.clients.len());
        let placement = {
            let caches = &self.caches;
            let topo = self.topo;
            let tp = |a: DtnId, b: DtnId| topo.throughput(a, b);
            let av = |d: DtnId| {
                caches.get(&d).map_or(0.0, |c| 1.0 - c.used() as f64 / c.capacity().max(1) as f64)
            };
            let inputs = RebalanceInputs {
                records: &window,
                homes: &homes,
                n_objects: self.catalog.len(),
                window_hours: epoch / 3_600.0,
                throughput: &tp,
                availability: &av,
            };
            rebalance(self.report.rebalances, k, self.cfg.seed ^ self.report.rebalances, self.cfg.placement.weights, &inputs)
        };
        self.report.rebalances += 1;

        let mut hubs = BTreeMap::new();
        for g in &placement.groups {
            let Some(hub) = g.sub_groups.first().and_then(|s| s.hub) else {
                continue;
            };
            for u in &g.members {
                hubs.insert(*u, hub);
            }
            let members: alloc::collections::BTreeSet<UserId> = g.members.iter().copied().collect();
            let mut counts: BTreeMap<ObjectId, u64> = BTreeMap::new();
            let mut ranges = BTreeMap::new();
            for r in window.iter().filter(|r| members.contains(&r.user)) {
                *counts.entry(r.object).or_default() += 1;
                ranges.insert(r.object, r.range);
            }
            let budget = (self.cfg.placement.budget_fraction * self.caches[&hub].capacity() as f64) as u64;
            let catalog = self.catalog;
            let picks = replicate_hot(&counts, &ranges, |o, iv| catalog.bytes(o, iv), budget);
            for p in picks {
                let missing = IntervalSet::from_interval(p.range)
                    .difference(&self.caches[&hub].holdings(p.object))
                    .difference(&self.inbound_union(hub, p.object));
                if !missing.is_empty() {
                    self.report.replicated_bytes += self.set_bytes(p.object, &missing);
                    self.start_transfer(self.server, hub, p.object, missing, Purpose::Replica)?;
                }
            }
        }
        self.report.hub_changes +=
            hubs.iter().filter(|(u, h)| self.hubs.get(u).is_some_and(|old| old != *h)).count() as u64;
        self.hubs = hubs;
        self.placement = Some(placement);
        if self.now + epoch <= last_request {
            self.schedule(self.now + epoch, Kind::Rebalance);
        }
        Ok(())
    }
}

impl SimConfig {
    pub(crate) fn placement_enabled(&self) -> bool {
        self.strategy.streams()
    }
}

/// Final state of a run alongside its report.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub report: SimReport,
    /// Cache contents per client DTN at the end of the run.
    pub caches: BTreeMap<DtnId, CacheStore>,
    /// The most recent rebalance, if any ran.
    pub placement: Option<Placement>,
    /// Rules in force at the end of a mining-based run.
    pub rules: Option<RuleSet>,
}

/// Replays `records` against `topo` under the configured strategy.
pub fn run(records: &[AccessRecord], catalog: &Catalog, topo: &Topology, cfg: &SimConfig) -> Result<SimReport> {
    run_detailed(records, catalog, topo, cfg).map(|o| o.report)
}

/// Like [`run`], keeping the caches, the last placement and the mined rules.
pub fn run_detailed(
    records: &[AccessRecord],
    catalog: &Catalog,
    topo: &Topology,
    cfg: &SimConfig,
) -> Result<SimOutcome> {
    cfg.validate()?;
    topo.validate()?;
    if let Some(r) = records.iter().find(|r| catalog.get(r.object).is_none()) {
        return Err(Error::UnknownObject(r.object));
    }
    let mut owned;
    let mut records = records;
    if records.windows(2).any(|w| w[0].ts > w[1].ts) {
        owned = records.to_vec();
        crate::trace::sort_records(&mut owned);
        records = &owned;
    }

    let clients = topo.clients();
    let caches = if cfg.strategy.caches() {
        clients.iter().map(|&d| (d, CacheStore::new(cfg.cache.capacity, cfg.cache.policy))).collect()
    } else {
        BTreeMap::new()
    };
    let mut sim = Sim {
        cfg,
        catalog,
        topo,
        server: topo.server(),
        clients,
        net: Network::new(topo),
        queue: OriginQueue::new(cfg.workers.unwrap_or(ORIGIN_WORKERS)),
        heap: BinaryHeap::new(),
        seq: 0,
        caches,
        prov: BTreeMap::new(),
        transfers: BTreeMap::new(),
        requests: Vec::with_capacity(records.len()),
        predictor: cfg.strategy.model().map(|m| PredictionEngine::new(m, cfg.prediction.clone())),
        streams: cfg.strategy.streams().then(|| StreamServer::new(cfg.streaming.clone())),
        last_ts: BTreeMap::new(),
        window: Vec::new(),
        hubs: BTreeMap::new(),
        placement: None,
        report: SimReport { strategy: cfg.strategy, ..Default::default() },
        latencies: Vec::new(),
        throughputs: Vec::new(),
        busy_time: 0.0,
        now: 0.0,
    };

    let last_request = records.last().map_or(0.0, |r| r.ts);
    if cfg.placement_enabled() {
        if let Some(first) = records.first() {
            if first.ts + cfg.placement.epoch <= last_request {
                sim.schedule(first.ts + cfg.placement.epoch, Kind::Rebalance);
            }
        }
    }

    let mut next = 0;
    loop {
        let t_net = sim.net.next_completion();
        let t_evt = sim.heap.peek().map(|Reverse(e)| e.at);
        let t_req = records.get(next).map(|r| r.ts);
        let net_first = t_net.is_some_and(|(t, _)| {
            t_evt.is_none_or(|e| t <= e) && t_req.is_none_or(|r| t <= r)
        });
        if net_first {
            let (t, id) = t_net.unwrap();
            sim.now = sim.now.max(t);
            sim.on_transfer_done(id)?;
            continue;
        }
        if t_evt.is_some_and(|e| t_req.is_none_or(|r| e <= r)) {
            let Reverse(ev) = sim.heap.pop().unwrap();
            sim.now = sim.now.max(ev.at);
            match ev.kind {
                Kind::Prefetch(plan) => sim.on_prefetch(plan)?,
                Kind::Tick(object) => sim.on_tick(object)?,
                Kind::Rebalance => sim.on_rebalance(last_request)?,
            }
            continue;
        }
        let Some(rec) = records.get(next) else {
            break;
        };
        next += 1;
        sim.now = sim.now.max(rec.ts);
        sim.on_request(rec)?;
        sim.report.peak_port_load = sim.report.peak_port_load.max(sim.net.peak_port_load());
    }

    let mut report = sim.report;
    let leftover: f64 = sim
        .prov
        .values()
        .flat_map(|p| p.prefetched.iter())
        .map(|(o, set)| catalog.rate(*o) * set.measure() as f64)
        .sum();
    report.prefetch.wrong = leftover;
    report.recall = report.prefetch.recall();
    report.normalized_origin_requests =
        if report.requests > 0 { report.origin_requests as f64 / report.requests as f64 } else { 0.0 };
    let lat = sorted(sim.latencies);
    report.latency_mean = mean(&lat);
    report.latency_p50 = percentile(&lat, 50.0);
    report.latency_p95 = percentile(&lat, 95.0);
    report.latency_p99 = percentile(&lat, 99.0);
    report.throughput_mean_mbps = mean(&sim.throughputs);
    let delivered = report.bytes.total();
    report.throughput_aggregate_mbps = if sim.busy_time > 0.0 { delivered * 8.0 / 1e6 / sim.busy_time } else { 0.0 };
    report.local_fraction = if delivered > 0.0 {
        (report.bytes.local + report.bytes.prefetch + report.bytes.stream) / delivered
    } else {
        0.0
    };
    report.peak_in_service = sim.queue.peak_busy();
    report.makespan = sim.now;
    let rules = match cfg.strategy.model() {
        Some(Model::Markov) | None => None,
        Some(_) => sim.predictor.as_ref().map(|p| p.rules().clone()),
    };
    Ok(SimOutcome { report, caches: sim.caches, placement: sim.placement, rules })
}
