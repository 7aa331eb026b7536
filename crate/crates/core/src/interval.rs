//! Half-open integer-second intervals and canonical interval sets.
//!
//! All observation-time arithmetic in the crate goes through these types so
//! that partition properties (`fresh + duplicate == request`,
//! `hit + miss == request`) hold exactly.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Observation-time interval `[start, end)` in whole seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: i64,
    pub end: i64,
}

impl Interval {
    /// Builds an interval, returning `None` unless `start < end`.
    pub fn new(start: i64, end: i64) -> Option<Self> {
        (start < end).then_some(Self { start, end })
    }

    pub fn len(&self) -> i64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::new(self.start.max(other.start), self.end.min(other.end))
    }

    /// True when the two intervals share a positive-length stretch.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// True when the intervals overlap or touch end-to-start.
    pub fn touches(&self, other: &Interval) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn contains(&self, other: &Interval) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift(&self, by: i64) -> Interval {
        Interval { start: self.start + by, end: self.end + by }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Sorted, disjoint, non-adjacent set of intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntervalSet {
    spans: Vec<Interval>,
}

impl IntervalSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_interval(iv: Interval) -> Self {
        Self { spans: alloc::vec![iv] }
    }

    /// Canonicalizes an arbitrary list of intervals.
    pub fn from_intervals<I: IntoIterator<Item = Interval>>(items: I) -> Self {
        let mut spans: Vec<Interval> = items.into_iter().filter(|iv| !iv.is_empty()).collect();
        spans.sort_unstable();
        let mut out: Vec<Interval> = Vec::with_capacity(spans.len());
        for iv in spans {
            match out.last_mut() {
                Some(last) if last.end >= iv.start => last.end = last.end.max(iv.end),
                _ => out.push(iv),
            }
        }
        Self { spans: out }
    }

    pub fn spans(&self) -> &[Interval] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Total covered length in seconds.
    pub fn measure(&self) -> i64 {
        self.spans.iter().map(Interval::len).sum()
    }

    pub fn insert(&mut self, iv: Interval) {
        if iv.is_empty() {
            return;
        }
        // first span that could touch `iv`
        let lo = self.spans.partition_point(|s| s.end < iv.start);
        let mut hi = lo;
        let mut merged = iv;
        while hi < self.spans.len() && self.spans[hi].start <= merged.end {
            merged.start = merged.start.min(self.spans[hi].start);
            merged.end = merged.end.max(self.spans[hi].end);
            hi += 1;
        }
        self.spans.splice(lo..hi, core::iter::once(merged));
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.spans.iter().chain(other.spans.iter()).copied())
    }

    pub fn intersect_interval(&self, iv: &Interval) -> IntervalSet {
        let lo = self.spans.partition_point(|s| s.end <= iv.start);
        let spans = self.spans[lo..]
            .iter()
            .take_while(|s| s.start < iv.end)
            .filter_map(|s| s.intersect(iv))
            .collect();
        IntervalSet { spans }
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let (mut i, mut j) = (0, 0);
        let mut spans = Vec::new();
        while i < self.spans.len() && j < other.spans.len() {
            let (a, b) = (self.spans[i], other.spans[j]);
            if let Some(x) = a.intersect(&b) {
                spans.push(x);
            }
            if a.end <= b.end {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { spans }
    }

    /// `self \ other`.
    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut spans = Vec::new();
        let mut j = 0;
        for &a in &self.spans {
            let mut cur = a.start;
            while j < other.spans.len() && other.spans[j].end <= cur {
                j += 1;
            }
            let mut k = j;
            while k < other.spans.len() && other.spans[k].start < a.end {
                let b = other.spans[k];
                if b.start > cur {
                    spans.push(Interval { start: cur, end: b.start });
                }
                cur = cur.max(b.end);
                k += 1;
            }
            if cur < a.end {
                spans.push(Interval { start: cur, end: a.end });
            }
        }
        IntervalSet { spans }
    }

    pub fn subtract_interval(&mut self, iv: &Interval) {
        *self = self.difference(&IntervalSet::from_interval(*iv));
    }

    pub fn contains_interval(&self, iv: &Interval) -> bool {
        let idx = self.spans.partition_point(|s| s.end <= iv.start);
        self.spans.get(idx).is_some_and(|s| s.contains(iv))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Interval> {
        self.spans.iter()
    }
}

impl FromIterator<Interval> for IntervalSet {
    fn from_iter<T: IntoIterator<Item = Interval>>(iter: T) -> Self {
        IntervalSet::from_intervals(iter)
    }
}
