//! Session transactions and rule-based prediction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::trace::AccessRecord;
use crate::{ObjectId, Timestamp, UserId};

use super::{fire_time, follow_on, MinerConfig, PlanSource, PrefetchPlan, RuleSet};

/// Splits time-ordered records into per-user sessions separated by more
/// than `gap` seconds of inactivity. Each session becomes the set of objects
/// it touched. Sessions are returned in order of their first request.
pub fn sessions(records: &[AccessRecord], gap: f64) -> Vec<Vec<ObjectId>> {
    let mut tracker = SessionTracker::new(gap);
    let mut out: Vec<(Timestamp, Vec<ObjectId>)> = Vec::new();
    for r in records {
        if let Some(closed) = tracker.observe(r) {
            out.push(closed);
        }
    }
    out.extend(tracker.drain());
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, s)| s).collect()
}

#[derive(Debug, Clone, Default)]
struct OpenSession {
    started: Timestamp,
    last: Timestamp,
    objects: BTreeSet<ObjectId>,
}

/// Incremental sessionizer used while replaying a trace.
#[derive(Debug, Clone, Default)]
pub struct SessionTracker {
    gap: f64,
    open: BTreeMap<UserId, OpenSession>,
}

impl SessionTracker {
    pub fn new(gap: f64) -> Self {
        Self { gap, open: BTreeMap::new() }
    }

    /// Adds a request to its user's session. Returns the user's previous
    /// session (start time and objects) if this request opened a new one.
    pub fn observe(&mut self, rec: &AccessRecord) -> Option<(Timestamp, Vec<ObjectId>)> {
        let gap = self.gap;
        let session = self.open.entry(rec.user).or_insert_with(|| OpenSession {
            started: rec.ts,
            last: rec.ts,
            objects: BTreeSet::new(),
        });
        let mut closed = None;
        if rec.ts - session.last > gap {
            let old = core::mem::replace(
                session,
                OpenSession { started: rec.ts, last: rec.ts, objects: BTreeSet::new() },
            );
            closed = Some((old.started, old.objects.into_iter().collect()));
        }
        session.last = rec.ts;
        session.objects.insert(rec.object);
        closed
    }

    /// Objects of the user's current session.
    pub fn context(&self, user: UserId) -> Option<&BTreeSet<ObjectId>> {
        self.open.get(&user).map(|s| &s.objects)
    }

    /// Closes every session idle for longer than the gap at `now`.
    pub fn close_idle(&mut self, now: Timestamp) -> Vec<(Timestamp, Vec<ObjectId>)> {
        let gap = self.gap;
        let idle: Vec<UserId> =
            self.open.iter().filter(|(_, s)| now - s.last > gap).map(|(u, _)| *u).collect();
        idle.into_iter()
            .filter_map(|u| self.open.remove(&u))
            .map(|s| (s.started, s.objects.into_iter().collect()))
            .collect()
    }

    pub fn drain(&mut self) -> Vec<(Timestamp, Vec<ObjectId>)> {
        core::mem::take(&mut self.open)
            .into_values()
            .map(|s| (s.started, s.objects.into_iter().collect()))
            .collect()
    }
}

/// Rule-based prediction with the last request alone as context.
pub fn predict_by_rules(
    last: &AccessRecord,
    prev: Option<&AccessRecord>,
    rules: &RuleSet,
    cfg: &MinerConfig,
) -> Vec<PrefetchPlan> {
    let context: BTreeSet<ObjectId> = [last.object].into_iter().collect();
    predict_by_rules_in_context(last, prev, &context, rules, cfg)
}

/// Plans the consequents of rules whose antecedent lies inside `context`,
/// best first: confidence, then support, then object id. Objects already in
/// the context are not predicted again.
pub fn predict_by_rules_in_context(
    last: &AccessRecord,
    prev: Option<&AccessRecord>,
    context: &BTreeSet<ObjectId>,
    rules: &RuleSet,
    cfg: &MinerConfig,
) -> Vec<PrefetchPlan> {
    let mut best: BTreeMap<ObjectId, (f64, u64)> = BTreeMap::new();
    for rule in rules.matching(context) {
        if context.contains(&rule.consequent) {
            continue;
        }
        let e = best.entry(rule.consequent).or_insert((rule.confidence, rule.support));
        if (rule.confidence, rule.support) > *e {
            *e = (rule.confidence, rule.support);
        }
    }
    let mut ranked: Vec<(ObjectId, f64, u64)> = best.into_iter().map(|(o, (c, s))| (o, c, s)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(&b.0)));
    let predicted_ts = follow_on(last, prev, cfg.default_period);
    let fire_at = fire_time(last.ts, predicted_ts, cfg.prefetch_offset);
    ranked
        .into_iter()
        .take(cfg.top_n)
        .map(|(object, _, _)| PrefetchPlan {
            user: last.user,
            object,
            range: last.range,
            fire_at,
            predicted_ts,
            source: PlanSource::Mining,
        })
        .collect()
}
