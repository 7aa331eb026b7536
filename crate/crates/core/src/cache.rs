//! Per-DTN cache of `(object, observation-range)` segments.
//!
//! Each object's cached ranges are kept coalesced; eviction removes whole
//! segments, chosen through an ordered index on the policy's priority.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::trace::bytes_for;
use crate::{DtnId, Error, Interval, IntervalSet, ObjectId, Result, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvictionPolicy {
    Lru,
    Lfu,
}

impl EvictionPolicy {
    pub fn name(self) -> &'static str {
        match self {
            Self::Lru => "lru",
            Self::Lfu => "lfu",
        }
    }
}

impl core::fmt::Display for EvictionPolicy {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for EvictionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::Lru, Self::Lfu]
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown eviction policy {s:?}")))
    }
}

/// Snapshot of one cached segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub object: ObjectId,
    pub range: Interval,
    pub bytes: u64,
    pub last_access: Timestamp,
    pub count: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy)]
struct Meta {
    end: i64,
    bytes: u64,
    last_access: Timestamp,
    count: u64,
    seq: u64,
}

/// Eviction priority; the smallest key is evicted first.
#[derive(Debug, Clone, Copy)]
struct Key {
    count: u64,
    last_access: Timestamp,
    seq: u64,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then(self.last_access.total_cmp(&other.last_access))
            .then(self.seq.cmp(&other.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LookupResult {
    pub hit: IntervalSet,
    pub miss: IntervalSet,
    pub bytes_hit: u64,
    pub bytes_miss: u64,
}

fn set_bytes(rate: f64, set: &IntervalSet) -> u64 {
    set.iter().map(|iv| bytes_for(rate, iv.len())).sum()
}

#[derive(Debug, Clone)]
pub struct CacheStore {
    capacity: u64,
    used: u64,
    policy: EvictionPolicy,
    /// Segments per object keyed by range start.
    entries: BTreeMap<ObjectId, BTreeMap<i64, Meta>>,
    index: BTreeMap<Key, (ObjectId, i64)>,
    next_seq: u64,
}

impl CacheStore {
    pub fn new(capacity: u64, policy: EvictionPolicy) -> Self {
        Self { capacity, used: 0, policy, entries: BTreeMap::new(), index: BTreeMap::new(), next_seq: 0 }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn policy(&self) -> EvictionPolicy {
        self.policy
    }

    pub fn segment_count(&self) -> usize {
        self.index.len()
    }

    fn key(&self, m: &Meta) -> Key {
        let count = match self.policy {
            EvictionPolicy::Lru => 0,
            EvictionPolicy::Lfu => m.count,
        };
        Key { count, last_access: m.last_access, seq: m.seq }
    }

    /// Cached ranges of `object`.
    pub fn holdings(&self, object: ObjectId) -> IntervalSet {
        self.entries
            .get(&object)
            .map(|segs| segs.iter().map(|(s, m)| Interval { start: *s, end: m.end }).collect())
            .unwrap_or_default()
    }

    /// Cached part of `range` without touching any metadata.
    pub fn peek(&self, object: ObjectId, range: &Interval) -> IntervalSet {
        let Some(segs) = self.entries.get(&object) else {
            return IntervalSet::new();
        };
        overlapping(segs, range).map(|(s, m)| Interval { start: s, end: m.end }).filter_map(|iv| iv.intersect(range)).collect()
    }

    /// Splits `range` into cached and missing parts and marks every segment
    /// it touches as used at `now`.
    pub fn lookup(&mut self, object: ObjectId, range: &Interval, rate: f64, now: Timestamp) -> LookupResult {
        let hit = self.peek(object, range);
        let miss = IntervalSet::from_interval(*range).difference(&hit);
        self.touch(object, range, now);
        LookupResult { bytes_hit: set_bytes(rate, &hit), bytes_miss: set_bytes(rate, &miss), hit, miss }
    }

    /// Records a use of every segment overlapping `range`: recency moves to
    /// `now` and the access count grows by one.
    pub fn touch(&mut self, object: ObjectId, range: &Interval, now: Timestamp) {
        let Some(segs) = self.entries.get(&object) else {
            return;
        };
        let starts: Vec<i64> = overlapping(segs, range).map(|(s, _)| s).collect();
        for start in starts {
            let meta = self.entries[&object][&start];
            self.index.remove(&self.key(&meta));
            let updated = Meta { last_access: meta.last_access.max(now), count: meta.count + 1, ..meta };
            self.index.insert(self.key(&updated), (object, start));
            self.entries.get_mut(&object).unwrap().insert(start, updated);
        }
    }

    fn remove(&mut self, object: ObjectId, start: i64) -> Meta {
        let segs = self.entries.get_mut(&object).unwrap();
        let meta = segs.remove(&start).unwrap();
        if segs.is_empty() {
            self.entries.remove(&object);
        }
        self.used -= meta.bytes;
        meta
    }

    fn evict_one(&mut self) -> Option<(ObjectId, Interval)> {
        let (_, (object, start)) = self.index.pop_first()?;
        let meta = self.remove(object, start);
        Some((object, Interval { start, end: meta.end }))
    }

    /// Caches `range` of `object`, evicting segments until it fits. The new
    /// range is merged with touching segments of the same object. Returns
    /// the evicted segments in eviction order.
    pub fn insert(
        &mut self,
        object: ObjectId,
        range: Interval,
        rate: f64,
        now: Timestamp,
    ) -> Result<Vec<(ObjectId, Interval)>> {
        let size = bytes_for(rate, range.len());
        if size > self.capacity {
            return Err(Error::SegmentTooLarge { size, capacity: self.capacity });
        }
        let touching: Vec<i64> = self
            .entries
            .get(&object)
            .map(|segs| {
                let lo = segs.range(..range.start).next_back().map_or(range.start, |(s, _)| *s);
                segs.range(lo..=range.end)
                    .filter(|(s, m)| Interval { start: **s, end: m.end }.touches(&range))
                    .map(|(s, _)| *s)
                    .collect()
            })
            .unwrap_or_default();

        let mut merged = range;
        let mut last_access = now;
        let mut count = 1;
        let mut neighbours = Vec::new();
        for start in touching {
            let meta = self.entries[&object][&start];
            self.index.remove(&self.key(&meta));
            self.remove(object, start);
            merged.start = merged.start.min(start);
            merged.end = merged.end.max(meta.end);
            last_access = last_access.max(meta.last_access);
            count += meta.count;
            neighbours.push((object, Interval { start, end: meta.end }));
        }

        let mut evicted = Vec::new();
        let mut bytes = bytes_for(rate, merged.len());
        if bytes > self.capacity {
            // the union no longer fits anywhere: keep only the new range
            evicted.append(&mut neighbours);
            merged = range;
            bytes = size;
            last_access = now;
            count = 1;
        }
        while self.used + bytes > self.capacity {
            match self.evict_one() {
                Some(v) => evicted.push(v),
                None => break,
            }
        }
        let meta = Meta { end: merged.end, bytes, last_access, count, seq: self.next_seq };
        self.next_seq += 1;
        self.index.insert(self.key(&meta), (object, merged.start));
        self.entries.entry(object).or_default().insert(merged.start, meta);
        self.used += bytes;
        Ok(evicted)
    }

    /// All segments, ordered by object and range.
    pub fn segments(&self) -> impl Iterator<Item = SegmentInfo> + '_ {
        self.entries.iter().flat_map(|(object, segs)| {
            segs.iter().map(move |(start, m)| SegmentInfo {
                object: *object,
                range: Interval { start: *start, end: m.end },
                bytes: m.bytes,
                last_access: m.last_access,
                count: m.count,
                seq: m.seq,
            })
        })
    }
}

fn overlapping<'a>(segs: &'a BTreeMap<i64, Meta>, range: &Interval) -> impl Iterator<Item = (i64, &'a Meta)> + 'a {
    let lo = segs.range(..=range.start).next_back().map_or(range.start, |(s, _)| *s);
    let end = range.end;
    let start = range.start;
    segs.range(lo..end).filter(move |(_, m)| m.end > start).map(|(s, m)| (*s, m))
}

/// A peer cache visible to the requesting DTN.
pub struct PeerView<'a> {
    pub dtn: DtnId,
    pub store: &'a CacheStore,
    /// Estimated peer-to-requester throughput, Gbps.
    pub throughput: f64,
}

/// Assignment of missing data to peers and the origin.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeerPlan {
    pub from_peers: Vec<(DtnId, IntervalSet)>,
    pub origin: IntervalSet,
}

/// Assigns each missing sub-range to the cheapest source. Transfer time is
/// size over throughput, so a peer wins whenever it holds the data and is at
/// least as fast as the origin; among peers the fastest wins, ties going to
/// the lowest DTN id.
pub fn peer_lookup(object: ObjectId, miss: &IntervalSet, peers: &[PeerView<'_>], origin_throughput: f64) -> PeerPlan {
    let mut order: Vec<&PeerView<'_>> = peers.iter().collect();
    order.sort_by(|a, b| b.throughput.total_cmp(&a.throughput).then(a.dtn.cmp(&b.dtn)));
    let mut remaining = miss.clone();
    let mut from_peers = Vec::new();
    for peer in order {
        if remaining.is_empty() || peer.throughput < origin_throughput || !(peer.throughput > 0.0) {
            break;
        }
        let held = peer.store.holdings(object);
        let got = remaining.intersect(&held);
        if !got.is_empty() {
            remaining = remaining.difference(&got);
            from_peers.push((peer.dtn, got));
        }
    }
    from_peers.sort_by_key(|(d, _)| *d);
    PeerPlan { from_peers, origin: remaining }
}
