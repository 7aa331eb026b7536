//! User (human/program) and request (regular/real-time/overlapping)
//! classification, plus fresh/duplicate decomposition of overlapping requests.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::trace::{bytes_for, AccessRecord, Catalog, RequestSequence};
use crate::{Error, IntervalSet, ObjectId, Result, Timestamp, UserId, SECONDS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Running window in seconds; whole days are used.
    pub window: i64,
    /// An object is "repeated" on a day when requested more than this many times.
    pub min_daily_repeats: u32,
    /// Consecutive days the pattern must hold; defaults to the full window.
    pub pattern_days: Option<u32>,
    /// Largest gap between consecutive requests still counted as real-time.
    pub realtime_period_max: f64,
    /// Consecutive real-time requests before a stream is promoted.
    pub program_repeat_threshold: u32,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            window: 7 * SECONDS_PER_DAY,
            min_daily_repeats: 1,
            pattern_days: None,
            realtime_period_max: 300.0,
            program_repeat_threshold: 3,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < SECONDS_PER_DAY {
            return Err(Error::InvalidConfig("classifier window must span at least one day".into()));
        }
        if self.pattern_days == Some(0) || self.program_repeat_threshold == 0 {
            return Err(Error::InvalidConfig("classifier thresholds must be positive".into()));
        }
        if !(self.realtime_period_max > 0.0) {
            return Err(Error::InvalidConfig("realtime_period_max must be positive".into()));
        }
        Ok(())
    }

    fn days(&self) -> i64 {
        self.pattern_days.map(i64::from).unwrap_or(self.window / SECONDS_PER_DAY).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UserKindVerdict {
    Human,
    Program,
}

/// Per-object-set verdict for one user. Objects absent from
/// `program_objects` are treated as human traffic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserClass {
    /// Program objects and the day boundary at which the pattern was detected.
    pub program_objects: BTreeMap<ObjectId, Timestamp>,
}

impl UserClass {
    pub fn kind(&self) -> UserKindVerdict {
        if self.program_objects.is_empty() {
            UserKindVerdict::Human
        } else {
            UserKindVerdict::Program
        }
    }

    pub fn is_program_for(&self, object: ObjectId) -> bool {
        self.program_objects.contains_key(&object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RequestClass {
    Unclassified,
    Regular,
    RealTime,
    Overlapping,
}

pub fn day_of(ts: Timestamp) -> i64 {
    libm::floor(ts / SECONDS_PER_DAY as f64) as i64
}

/// Per-day request counts of one user, enough to answer program-pattern
/// queries as the window slides.
#[derive(Debug, Clone, Default)]
pub struct UserActivity {
    daily: BTreeMap<i64, BTreeMap<ObjectId, u32>>,
    cached: Option<(i64, BTreeSet<ObjectId>)>,
}

impl UserActivity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, rec: &AccessRecord) {
        let day = day_of(rec.ts);
        *self.daily.entry(day).or_default().entry(rec.object).or_default() += 1;
        if matches!(self.cached, Some((d, _)) if day < d) {
            self.cached = None;
        }
    }

    /// Objects repeated on every complete day of the window that ends at the
    /// day boundary `boundary` (days `boundary - n .. boundary`).
    fn qualifying(&self, boundary: i64, cfg: &ClassifierConfig) -> BTreeSet<ObjectId> {
        let need = cfg.min_daily_repeats + 1;
        let days = cfg.days();
        let mut acc: Option<BTreeSet<ObjectId>> = None;
        for d in boundary - days..boundary {
            let Some(counts) = self.daily.get(&d) else {
                return BTreeSet::new();
            };
            let today: BTreeSet<ObjectId> =
                counts.iter().filter(|(_, c)| **c >= need).map(|(o, _)| *o).collect();
            acc = Some(match acc {
                None => today,
                Some(prev) => prev.intersection(&today).copied().collect(),
            });
            if acc.as_ref().is_some_and(BTreeSet::is_empty) {
                return BTreeSet::new();
            }
        }
        acc.unwrap_or_default()
    }

    /// Program objects at `now`, memoized per day.
    pub fn program_objects(&mut self, now: Timestamp, cfg: &ClassifierConfig) -> &BTreeSet<ObjectId> {
        let day = day_of(now);
        if !matches!(self.cached, Some((d, _)) if d == day) {
            let set = self.qualifying(day, cfg);
            self.cached = Some((day, set));
        }
        &self.cached.as_ref().unwrap().1
    }

    pub fn classify(&self, now: Timestamp, cfg: &ClassifierConfig) -> UserClass {
        let day = day_of(now);
        let current = self.qualifying(day, cfg);
        let mut program_objects = BTreeMap::new();
        for obj in current {
            // walk back to the start of the unbroken qualifying run
            let mut first = day;
            while self.qualifying(first - 1, cfg).contains(&obj) {
                first -= 1;
            }
            program_objects.insert(obj, (first * SECONDS_PER_DAY) as f64);
        }
        UserClass { program_objects }
    }

    /// Objects that qualified at any day boundary up to and including `last_day`.
    pub fn ever_program(&self, last_day: i64, cfg: &ClassifierConfig) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        let Some(&first) = self.daily.keys().next() else {
            return out;
        };
        for boundary in first + cfg.days()..=last_day {
            out.extend(self.qualifying(boundary, cfg));
        }
        out
    }
}

/// Classifies a user over the window ending at `now`: an object is program
/// traffic when it was requested at least `min_daily_repeats + 1` times on
/// every complete day of the window.
pub fn classify_user(seq: &RequestSequence, cfg: &ClassifierConfig, now: Timestamp) -> UserClass {
    let mut activity = UserActivity::new();
    for r in seq.records.iter().filter(|r| r.ts < now) {
        activity.record(r);
    }
    activity.classify(now, cfg)
}

/// Classifies `cur` against the previous request of the same user and
/// object. Real-time takes precedence over overlapping.
pub fn classify_request(
    prev: Option<&AccessRecord>,
    cur: &AccessRecord,
    cfg: &ClassifierConfig,
) -> Result<RequestClass> {
    let Some(prev) = prev else {
        return Ok(RequestClass::Unclassified);
    };
    if prev.user != cur.user || prev.object != cur.object {
        return Err(Error::MismatchedStream(prev.user, prev.object, cur.user, cur.object));
    }
    let gap = (cur.ts - prev.ts).abs();
    Ok(if gap <= cfg.realtime_period_max {
        RequestClass::RealTime
    } else if prev.range.overlaps(&cur.range) {
        RequestClass::Overlapping
    } else {
        RequestClass::Regular
    })
}

/// Splits `cur.range` into the part not covered by `prev_ranges` (fresh) and
/// the part already transferred before (duplicate).
pub fn decompose_overlap(prev_ranges: &IntervalSet, cur: &AccessRecord) -> (IntervalSet, IntervalSet) {
    let requested = IntervalSet::from_interval(cur.range);
    let duplicate = requested.intersect(prev_ranges);
    let fresh = requested.difference(prev_ranges);
    (fresh, duplicate)
}

/// Trace-level analogue of the user/volume and request-type breakdowns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub users: u64,
    pub program_users: u64,
    pub human_bytes: u64,
    pub program_bytes: u64,
    /// Program volume by request class (regular, real-time, overlapping).
    pub regular_bytes: u64,
    pub real_time_bytes: u64,
    pub overlapping_bytes: u64,
    pub unclassified_bytes: u64,
    pub fresh_bytes: u64,
    pub duplicate_bytes: u64,
}

fn share(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}

impl ClassificationSummary {
    pub fn human_user_share(&self) -> f64 {
        share(self.users - self.program_users, self.users)
    }

    pub fn program_user_share(&self) -> f64 {
        share(self.program_users, self.users)
    }

    pub fn program_volume_share(&self) -> f64 {
        share(self.program_bytes, self.program_bytes + self.human_bytes)
    }

    fn typed(&self) -> u64 {
        self.regular_bytes + self.real_time_bytes + self.overlapping_bytes
    }

    /// `(regular, real_time, overlapping)` shares of classified program volume.
    pub fn type_mix(&self) -> (f64, f64, f64) {
        let t = self.typed();
        (share(self.regular_bytes, t), share(self.real_time_bytes, t), share(self.overlapping_bytes, t))
    }

    pub fn duplicate_share(&self) -> f64 {
        share(self.duplicate_bytes, self.fresh_bytes + self.duplicate_bytes)
    }
}

/// Classifies every user and request of a sorted trace. Users count as
/// program users for the objects that showed a program pattern at any day
/// boundary of the trace.
pub fn summarize(records: &[AccessRecord], catalog: &Catalog, cfg: &ClassifierConfig) -> ClassificationSummary {
    let mut activity: BTreeMap<UserId, UserActivity> = BTreeMap::new();
    for r in records {
        activity.entry(r.user).or_default().record(r);
    }
    let last_day = records.iter().map(|r| day_of(r.ts)).max().unwrap_or(0) + 1;
    let program: BTreeMap<UserId, BTreeSet<ObjectId>> =
        activity.iter().map(|(u, a)| (*u, a.ever_program(last_day, cfg))).collect();

    let mut s = ClassificationSummary {
        users: activity.len() as u64,
        program_users: program.values().filter(|p| !p.is_empty()).count() as u64,
        ..Default::default()
    };
    let mut streams: BTreeMap<(UserId, ObjectId), (AccessRecord, IntervalSet)> = BTreeMap::new();
    for r in records {
        let bytes = catalog.bytes(r.object, &r.range);
        let is_program = program[&r.user].contains(&r.object);
        if !is_program {
            s.human_bytes += bytes;
        } else {
            s.program_bytes += bytes;
        }
        let key = (r.user, r.object);
        let prev = streams.get(&key);
        let class = classify_request(prev.map(|p| &p.0), r, cfg).expect("same stream");
        if is_program {
            match class {
                RequestClass::Unclassified => s.unclassified_bytes += bytes,
                RequestClass::Regular => s.regular_bytes += bytes,
                RequestClass::RealTime => s.real_time_bytes += bytes,
                RequestClass::Overlapping => {
                    s.overlapping_bytes += bytes;
                    let history = &prev.expect("overlap has history").1;
                    let (fresh, dup) = decompose_overlap(history, r);
                    let rate = catalog.rate(r.object);
                    s.fresh_bytes += bytes_for(rate, fresh.measure());
                    s.duplicate_bytes += bytes_for(rate, dup.measure());
                }
            }
        }
        let entry = streams.entry(key).or_insert_with(|| (*r, IntervalSet::new()));
        entry.0 = *r;
        entry.1.insert(r.range);
    }
    s
}

/// Records of one `(user, object)` stream, in order.
pub fn stream_of(seq: &RequestSequence, object: ObjectId) -> Vec<AccessRecord> {
    seq.for_object(object).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Interval;

    fn rec(ts: f64, start: i64, end: i64) -> AccessRecord {
        AccessRecord::new(ts, UserId(1), ObjectId(7), Interval::new(start, end).unwrap())
    }

    fn hourly(days: core::ops::Range<i64>) -> RequestSequence {
        let records = days
            .flat_map(|d| (0..24).map(move |h| d * SECONDS_PER_DAY + h * 3_600))
            .map(|t| rec(t as f64, t - 3_600, t))
            .collect();
        RequestSequence::new(UserId(1), records)
    }

    #[test]
    fn hourly_week_is_program() {
        let cfg = ClassifierConfig::default();
        let class = classify_user(&hourly(0..7), &cfg, (7 * SECONDS_PER_DAY) as f64);
        assert_eq!(class.kind(), UserKindVerdict::Program);
        assert!(class.is_program_for(ObjectId(7)));
        assert_eq!(class.program_objects[&ObjectId(7)], (7 * SECONDS_PER_DAY) as f64);
    }

    #[test]
    fn single_request_is_human() {
        let seq = RequestSequence::new(UserId(1), alloc::vec![rec(10.0, 0, 10)]);
        let class = classify_user(&seq, &ClassifierConfig::default(), 1e7);
        assert_eq!(class.kind(), UserKindVerdict::Human);
    }

    #[test]
    fn partial_week_is_human() {
        // oracle: per-day counts over days 0..7 are 24,24,24,0,0,0,0
        let seq = hourly(0..3);
        let mut per_day = [0u32; 7];
        for r in &seq.records {
            per_day[day_of(r.ts) as usize] += 1;
        }
        assert!(per_day.iter().any(|c| *c < 2));
        let class = classify_user(&seq, &ClassifierConfig::default(), (7 * SECONDS_PER_DAY) as f64);
        assert_eq!(class.kind(), UserKindVerdict::Human);
    }

    #[test]
    fn verdict_slides_with_window() {
        let cfg = ClassifierConfig::default();
        let seq = hourly(0..10);
        for day in 7..=10 {
            let c = classify_user(&seq, &cfg, (day * SECONDS_PER_DAY) as f64);
            assert_eq!(c.kind(), UserKindVerdict::Program, "day {day}");
            // detection time is stable while the pattern persists
            assert_eq!(c.program_objects[&ObjectId(7)], (7 * SECONDS_PER_DAY) as f64);
        }
        let later = classify_user(&seq, &cfg, (12 * SECONDS_PER_DAY) as f64);
        assert_eq!(later.kind(), UserKindVerdict::Human);
    }

    #[test]
    fn request_classes_follow_access_patterns() {
        let cfg = ClassifierConfig::default();
        let regular = classify_request(Some(&rec(3_600.0, 0, 3_600)), &rec(7_200.0, 3_600, 7_200), &cfg);
        assert_eq!(regular, Ok(RequestClass::Regular));
        let rt = classify_request(Some(&rec(60.0, 0, 60)), &rec(120.0, 60, 120), &cfg);
        assert_eq!(rt, Ok(RequestClass::RealTime));
        let ovl =
            classify_request(Some(&rec(86_400.0, 0, 86_400)), &rec(90_000.0, 3_600, 90_000), &cfg);
        assert_eq!(ovl, Ok(RequestClass::Overlapping));
        assert_eq!(classify_request(None, &rec(1.0, 0, 1), &cfg), Ok(RequestClass::Unclassified));
    }

    #[test]
    fn real_time_beats_overlapping() {
        let cfg = ClassifierConfig::default();
        let c = classify_request(Some(&rec(60.0, 0, 600)), &rec(120.0, 60, 660), &cfg);
        assert_eq!(c, Ok(RequestClass::RealTime));
    }

    #[test]
    fn mismatched_stream_is_an_error() {
        let cfg = ClassifierConfig::default();
        let mut other = rec(120.0, 0, 60);
        other.object = ObjectId(8);
        assert!(classify_request(Some(&rec(60.0, 0, 60)), &other, &cfg).is_err());
    }

    #[test]
    fn day_overlap_decomposes_into_23_of_24_hours() {
        let h = 3_600;
        let prev = IntervalSet::from_interval(Interval::new(0, 24 * h).unwrap());
        let (fresh, dup) = decompose_overlap(&prev, &rec(0.0, h, 25 * h));
        assert_eq!(dup.spans(), &[Interval::new(h, 24 * h).unwrap()]);
        assert_eq!(fresh.spans(), &[Interval::new(24 * h, 25 * h).unwrap()]);
        let ratio = dup.measure() as f64 / (24 * h) as f64;
        assert!((ratio - 23.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_edge_cases() {
        let cur = rec(0.0, 100, 200);
        let (fresh, dup) = decompose_overlap(&IntervalSet::new(), &cur);
        assert_eq!(fresh, IntervalSet::from_interval(cur.range));
        assert!(dup.is_empty());
        let cover = IntervalSet::from_intervals([Interval::new(0, 150).unwrap(), Interval::new(150, 300).unwrap()]);
        let (fresh, dup) = decompose_overlap(&cover, &cur);
        assert!(fresh.is_empty());
        assert_eq!(dup, IntervalSet::from_interval(cur.range));
    }
}
