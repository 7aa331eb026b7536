//! Server-side push streams for real-time pull traffic.
//!
//! Users that keep polling an object at short intervals are subscribed to a
//! single per-object stream. Each tick reads the newest data from the origin
//! once and fans it out to every subscriber's DTN.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::RequestClass;
use crate::trace::AccessRecord;
use crate::{DtnId, Interval, ObjectId, Timestamp, UserId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    /// Consecutive real-time requests before a user is subscribed.
    pub repeat_threshold: u32,
    /// Idle periods after which a subscriber is dropped.
    pub idle_periods: u32,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self { repeat_threshold: 3, idle_periods: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subscriber {
    pub user: UserId,
    pub dtn: DtnId,
    /// Polling period observed when the user was promoted, seconds.
    pub period: i64,
    pub last_seen: Timestamp,
    /// High-water mark at the time the user joined.
    pub joined_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSubscription {
    pub object: ObjectId,
    pub subscribers: BTreeMap<UserId, Subscriber>,
    pub period: i64,
    /// Observation time up to which data has been pushed.
    pub last_pushed: i64,
    pub idle_periods: u32,
    /// Time of the next due tick.
    pub next_tick: Timestamp,
    pub origin_reads: u64,
}

/// One origin read fanned out to client DTNs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushSegment {
    pub object: ObjectId,
    pub range: Interval,
    pub dtns: Vec<DtnId>,
    pub users: Vec<UserId>,
}

/// First multiple of `period` strictly after `now`.
pub fn next_aligned(now: Timestamp, period: i64) -> Timestamp {
    let p = period.max(1) as f64;
    (libm::floor(now / p) + 1.0) * p
}

impl StreamSubscription {
    fn recompute_period(&mut self) {
        if let Some(p) = self.subscribers.values().map(|s| s.period).min() {
            self.period = p;
        }
    }

    pub fn is_active(&self) -> bool {
        !self.subscribers.is_empty()
    }

    /// Pushes `[last_pushed, now)` to every subscriber. Data is appended
    /// continuously at the origin, so everything up to `now` is available.
    pub fn push_tick(&mut self, now: Timestamp) -> Option<PushSegment> {
        let available = libm::floor(now) as i64;
        let range = Interval::new(self.last_pushed, available)?;
        if self.subscribers.is_empty() {
            return None;
        }
        self.last_pushed = available;
        self.origin_reads += 1;
        let dtns: BTreeSet<DtnId> = self.subscribers.values().map(|s| s.dtn).collect();
        Some(PushSegment {
            object: self.object,
            range,
            dtns: dtns.into_iter().collect(),
            users: self.subscribers.keys().copied().collect(),
        })
    }

    /// Drops subscribers idle for `idle_periods` periods. Returns them; the
    /// subscription is over once none remain.
    pub fn expire(&mut self, now: Timestamp) -> Vec<UserId> {
        let limit = self.idle_periods as f64 * self.period as f64;
        let idle: Vec<UserId> =
            self.subscribers.values().filter(|s| now - s.last_seen >= limit).map(|s| s.user).collect();
        for u in &idle {
            self.subscribers.remove(u);
        }
        self.recompute_period();
        idle
    }
}

/// Creates the object's subscription or adds the user to it. The stream
/// period becomes the smallest subscriber period.
pub fn promote_to_stream<'a>(
    subs: &'a mut BTreeMap<ObjectId, StreamSubscription>,
    user: UserId,
    dtn: DtnId,
    object: ObjectId,
    observed_period: f64,
    now: Timestamp,
    cfg: &StreamConfig,
) -> &'a mut StreamSubscription {
    let period = (libm::round(observed_period) as i64).max(1);
    let mark = libm::floor(now) as i64;
    let sub = subs.entry(object).or_insert_with(|| StreamSubscription {
        object,
        subscribers: BTreeMap::new(),
        period,
        last_pushed: mark,
        idle_periods: cfg.idle_periods,
        next_tick: next_aligned(now, period),
        origin_reads: 0,
    });
    let joined_at = sub.last_pushed;
    sub.subscribers.insert(user, Subscriber { user, dtn, period, last_seen: now, joined_at });
    let before = sub.period;
    sub.recompute_period();
    if sub.period != before {
        sub.next_tick = next_aligned(now, sub.period);
    }
    sub
}

#[derive(Debug, Clone, Default)]
struct Streak {
    count: u32,
    last_gap: f64,
}

/// What the simulator has to do after a request was observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreamEvent {
    None,
    /// A tick must be scheduled at this time for the object.
    Schedule(ObjectId, Timestamp),
}

/// Tick result for one object.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickOutcome {
    pub push: Option<PushSegment>,
    pub expired: Vec<UserId>,
    pub next_tick: Option<Timestamp>,
}

/// All subscriptions held by the server DTN.
#[derive(Debug, Clone, Default)]
pub struct StreamServer {
    cfg: StreamConfig,
    subs: BTreeMap<ObjectId, StreamSubscription>,
    streaks: BTreeMap<(UserId, ObjectId), Streak>,
    origin_reads: u64,
}

impl StreamServer {
    pub fn new(cfg: StreamConfig) -> Self {
        Self { cfg, ..Default::default() }
    }

    pub fn subscription(&self, object: ObjectId) -> Option<&StreamSubscription> {
        self.subs.get(&object)
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &StreamSubscription> {
        self.subs.values()
    }

    pub fn is_subscribed(&self, user: UserId, object: ObjectId) -> bool {
        self.subs.get(&object).is_some_and(|s| s.subscribers.contains_key(&user))
    }

    /// Total origin reads issued by all streams.
    pub fn origin_reads(&self) -> u64 {
        self.origin_reads
    }

    /// Tracks consecutive real-time requests and promotes the user once the
    /// streak reaches the threshold.
    pub fn observe(&mut self, rec: &AccessRecord, class: RequestClass, prev_ts: Option<Timestamp>, dtn: DtnId) -> StreamEvent {
        if let Some(sub) = self.subs.get_mut(&rec.object) {
            if let Some(s) = sub.subscribers.get_mut(&rec.user) {
                s.last_seen = rec.ts;
                return StreamEvent::None;
            }
        }
        let streak = self.streaks.entry((rec.user, rec.object)).or_default();
        if class != RequestClass::RealTime {
            streak.count = 0;
            return StreamEvent::None;
        }
        streak.count += 1;
        streak.last_gap = prev_ts.map_or(streak.last_gap, |p| rec.ts - p);
        if streak.count < self.cfg.repeat_threshold || !(streak.last_gap > 0.0) {
            return StreamEvent::None;
        }
        let gap = streak.last_gap;
        self.streaks.remove(&(rec.user, rec.object));
        let sub = promote_to_stream(&mut self.subs, rec.user, dtn, rec.object, gap, rec.ts, &self.cfg);
        StreamEvent::Schedule(rec.object, sub.next_tick)
    }

    /// Runs the tick due at `now`. Stale ticks (superseded by a period
    /// change) do nothing.
    pub fn tick(&mut self, object: ObjectId, now: Timestamp) -> TickOutcome {
        let Some(sub) = self.subs.get_mut(&object) else {
            return TickOutcome::default();
        };
        if sub.next_tick != now {
            return TickOutcome::default();
        }
        let expired = sub.expire(now);
        let push = sub.push_tick(now);
        if push.is_some() {
            self.origin_reads += 1;
        }
        let next_tick = if sub.is_active() {
            sub.next_tick = next_aligned(now, sub.period);
            Some(sub.next_tick)
        } else {
            self.subs.remove(&object);
            None
        };
        TickOutcome { push, expired, next_tick }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poll(user: u32, ts: f64) -> AccessRecord {
        let end = ts as i64;
        AccessRecord::new(ts, UserId(user), ObjectId(1), Interval::new(end - 60, end).unwrap())
    }

    /// Feeds `n` polls at `period` and returns the scheduled tick, if any.
    fn feed(server: &mut StreamServer, user: u32, start: f64, period: f64, n: usize) -> Option<Timestamp> {
        let mut prev = None;
        let mut out = None;
        for k in 0..n {
            let ts = start + k as f64 * period;
            let class = if prev.is_some() { RequestClass::RealTime } else { RequestClass::Unclassified };
            if let StreamEvent::Schedule(_, t) = server.observe(&poll(user, ts), class, prev, DtnId(user)) {
                out = Some(t);
            }
            prev = Some(ts);
        }
        out
    }

    #[test]
    fn two_pollers_share_one_subscription() {
        let mut server = StreamServer::new(StreamConfig::default());
        assert!(feed(&mut server, 1, 60.0, 60.0, 4).is_some());
        feed(&mut server, 2, 60.0, 60.0, 4);
        let sub = server.subscription(ObjectId(1)).unwrap();
        assert_eq!((sub.subscribers.len(), sub.period), (2, 60));
    }

    #[test]
    fn faster_joiner_lowers_period() {
        let mut subs = BTreeMap::new();
        let cfg = StreamConfig::default();
        promote_to_stream(&mut subs, UserId(1), DtnId(1), ObjectId(1), 60.0, 100.0, &cfg);
        let sub = promote_to_stream(&mut subs, UserId(2), DtnId(2), ObjectId(1), 30.0, 110.0, &cfg);
        assert_eq!(sub.period, 30);
        assert_eq!(sub.next_tick, 120.0);
    }

    #[test]
    fn tick_fans_out_one_read() {
        let mut subs = BTreeMap::new();
        let cfg = StreamConfig::default();
        for u in 1..=3 {
            promote_to_stream(&mut subs, UserId(u), DtnId(u), ObjectId(1), 60.0, 120.0, &cfg);
        }
        let sub = subs.get_mut(&ObjectId(1)).unwrap();
        let push = sub.push_tick(180.0).unwrap();
        assert_eq!(push.range, Interval::new(120, 180).unwrap());
        assert_eq!(push.dtns.len(), 3);
        assert_eq!(sub.origin_reads, 1);
        assert!(sub.push_tick(180.0).is_none());
        assert_eq!(sub.last_pushed, 180);
    }

    #[test]
    fn idle_subscribers_expire() {
        let mut server = StreamServer::new(StreamConfig::default());
        let mut t = feed(&mut server, 1, 60.0, 60.0, 4).unwrap();
        feed(&mut server, 2, 60.0, 60.0, 4);
        // user 2 keeps polling, user 1 stops
        let mut last = 240.0;
        for _ in 0..12 {
            while last + 60.0 <= t {
                last += 60.0;
                server.observe(&poll(2, last), RequestClass::RealTime, Some(last - 60.0), DtnId(2));
            }
            let out = server.tick(ObjectId(1), t);
            t = out.next_tick.unwrap();
        }
        let sub = server.subscription(ObjectId(1)).unwrap();
        assert_eq!(sub.subscribers.keys().copied().collect::<Vec<_>>(), [UserId(2)]);
        // now everybody stops
        for _ in 0..11 {
            match server.tick(ObjectId(1), t).next_tick {
                Some(n) => t = n,
                None => break,
            }
        }
        assert!(server.subscription(ObjectId(1)).is_none());
    }

    #[test]
    fn stale_ticks_are_ignored() {
        let mut server = StreamServer::new(StreamConfig::default());
        assert!(feed(&mut StreamServer::default(), 1, 60.0, 60.0, 3).is_none());
        let t = feed(&mut server, 1, 60.0, 60.0, 4).unwrap();
        assert_eq!(server.tick(ObjectId(1), t + 1.0), TickOutcome::default());
        assert!(server.tick(ObjectId(1), t).push.is_some());
    }
}
