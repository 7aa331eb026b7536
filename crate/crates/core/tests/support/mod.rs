//! Brute-force reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeMap;

use obsflow_core::cache::{CacheStore, EvictionPolicy};
use obsflow_core::classifier::{classify_request, ClassifierConfig};
use obsflow_core::streaming::{StreamConfig, StreamEvent, StreamServer};
use obsflow_core::trace::AccessRecord;
use obsflow_core::{DtnId, Interval, IntervalSet, ObjectId, UserId};

/// A unit-size cache access: `slot` of `object`, i.e. `[2 slot, 2 slot + 1)`
/// so that no two slots ever touch.
pub type UnitOp = (u32, i64);

pub fn unit_range(slot: i64) -> Interval {
    Interval::new(2 * slot, 2 * slot + 1).unwrap()
}

/// Reference cache over unit-size items: a plain list scanned for the
/// victim on every miss. LFU breaks count ties by least recent use.
pub fn reference_victims(ops: &[UnitOp], capacity: usize, policy: EvictionPolicy) -> Vec<UnitOp> {
    struct Entry {
        item: UnitOp,
        last: usize,
        count: u64,
    }
    let mut entries: Vec<Entry> = Vec::new();
    let mut victims = Vec::new();
    for (t, &item) in ops.iter().enumerate() {
        if let Some(e) = entries.iter_mut().find(|e| e.item == item) {
            e.last = t;
            e.count += 1;
            continue;
        }
        if entries.len() == capacity {
            let mut best = 0;
            for (i, e) in entries.iter().enumerate() {
                let b = &entries[best];
                let older = match policy {
                    EvictionPolicy::Lru => e.last < b.last,
                    EvictionPolicy::Lfu => (e.count, e.last) < (b.count, b.last),
                };
                if older {
                    best = i;
                }
            }
            victims.push(entries.remove(best).item);
        }
        entries.push(Entry { item, last: t, count: 1 });
    }
    victims
}

/// The same accesses replayed through [`CacheStore`]: lookup, and insert on
/// a miss. Every item is one byte.
pub fn store_victims(ops: &[UnitOp], capacity: usize, policy: EvictionPolicy) -> Vec<UnitOp> {
    let mut store = CacheStore::new(capacity as u64, policy);
    let mut victims = Vec::new();
    for (t, &(object, slot)) in ops.iter().enumerate() {
        let range = unit_range(slot);
        let now = t as f64;
        let res = store.lookup(ObjectId(object), &range, 1.0, now);
        if !res.miss.is_empty() {
            for (o, iv) in store.insert(ObjectId(object), range, 1.0, now).unwrap() {
                victims.push((o.0, iv.start / 2));
            }
        }
    }
    victims
}

/// Every itemset of the distinct items in `transactions` with support of at
/// least `min_support`, by subset enumeration over bitmasks.
pub fn apriori_brute_force(transactions: &[Vec<ObjectId>], min_support: u64) -> BTreeMap<Vec<ObjectId>, u64> {
    let mut items: Vec<ObjectId> = transactions.iter().flatten().copied().collect();
    items.sort();
    items.dedup();
    assert!(items.len() <= 16, "brute force limited to 16 items");
    let masks: Vec<u32> = transactions
        .iter()
        .map(|t| t.iter().fold(0u32, |m, o| m | 1 << items.binary_search(o).unwrap()))
        .collect();
    let mut out = BTreeMap::new();
    for subset in 1u32..(1 << items.len()) {
        let support = masks.iter().filter(|&&m| m & subset == subset).count() as u64;
        if support >= min_support.max(1) {
            let set = (0..items.len()).filter(|i| subset & (1 << i) != 0).map(|i| items[i]).collect();
            out.insert(set, support);
        }
    }
    out
}

/// Number of transactions containing every item of `set`.
pub fn count_support(transactions: &[Vec<ObjectId>], set: &[ObjectId]) -> u64 {
    transactions.iter().filter(|t| set.iter().all(|o| t.contains(o))).count() as u64
}

pub struct StreamRun {
    pub reads: u64,
    pub first_promotion: f64,
    pub end: f64,
    pub high_water: i64,
    pub coverage: BTreeMap<UserId, (i64, IntervalSet)>,
}

/// `k` users polling one object every `period` seconds with fixed phase
/// offsets; ticks run in time order between polls.
pub fn drive_streams(k: usize, period: i64, phases: &[f64], polls: usize) -> StreamRun {
    let object = ObjectId(7);
    let p = period as f64;
    let mut events: Vec<(f64, u32)> = Vec::new();
    for (u, phase) in phases.iter().enumerate().take(k) {
        for n in 0..polls {
            events.push((1_000.0 * p + n as f64 * p + phase * p, u as u32));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut server = StreamServer::new(StreamConfig::default());
    let mut ticks: Vec<f64> = Vec::new();
    let mut last: BTreeMap<u32, AccessRecord> = BTreeMap::new();
    let mut coverage: BTreeMap<UserId, (i64, IntervalSet)> = BTreeMap::new();
    let mut first_promotion = f64::NAN;
    let cfg = ClassifierConfig::default();
    let run_ticks = |until: f64, server: &mut StreamServer, ticks: &mut Vec<f64>, coverage: &mut BTreeMap<UserId, (i64, IntervalSet)>| {
        while let Some(i) = (0..ticks.len()).filter(|&i| ticks[i] <= until).min_by(|&a, &b| ticks[a].total_cmp(&ticks[b])) {
            let t = ticks.swap_remove(i);
            let out = server.tick(object, t);
            if let Some(push) = out.push {
                for u in push.users {
                    if let Some(c) = coverage.get_mut(&u) {
                        c.1.insert(push.range);
                    }
                }
            }
            ticks.extend(out.next_tick);
        }
    };
    for &(ts, u) in &events {
        run_ticks(ts, &mut server, &mut ticks, &mut coverage);
        let end = ts.floor() as i64;
        let rec = AccessRecord::new(ts, UserId(u), object, Interval::new(end - period, end).unwrap());
        let prev = last.insert(u, rec);
        let class = classify_request(prev.as_ref(), &rec, &cfg).unwrap();
        let ev = server.observe(&rec, class, prev.map(|r| r.ts), DtnId(1 + u % 3));
        if let StreamEvent::Schedule(_, at) = ev {
            if first_promotion.is_nan() {
                first_promotion = ts;
            }
            ticks.push(at);
        }
        if let Some(sub) = server.subscription(object) {
            if let Some(s) = sub.subscribers.get(&UserId(u)) {
                coverage.entry(UserId(u)).or_insert_with(|| (s.joined_at, IntervalSet::new()));
            }
        }
    }
    let end = events.last().map_or(0.0, |e| e.0);
    run_ticks(end, &mut server, &mut ticks, &mut coverage);
    let high_water = server.subscription(object).map_or(i64::MIN, |s| s.last_pushed);
    if first_promotion.is_nan() {
        first_promotion = end;
    }
    StreamRun { reads: server.origin_reads(), first_promotion, end, high_water, coverage }
}
