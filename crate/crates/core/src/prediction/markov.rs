//! First-order Markov successor prediction over access paths.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::trace::AccessRecord;
use crate::{ObjectId, UserId};

use super::{fire_time, follow_on, MinerConfig, PlanSource, PrefetchPlan};

/// Transition counts between consecutive objects of each user's path.
#[derive(Debug, Clone, Default)]
pub struct MarkovModel {
    transitions: BTreeMap<ObjectId, BTreeMap<ObjectId, u64>>,
    last: BTreeMap<UserId, ObjectId>,
}

impl MarkovModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the model from one serialized access path.
    pub fn from_path(path: &[ObjectId]) -> Self {
        let mut m = Self::new();
        for w in path.windows(2) {
            m.count(w[0], w[1]);
        }
        m
    }

    fn count(&mut self, from: ObjectId, to: ObjectId) {
        *self.transitions.entry(from).or_default().entry(to).or_default() += 1;
    }

    /// Extends the requesting user's path with `rec`.
    pub fn observe(&mut self, rec: &AccessRecord) {
        if let Some(prev) = self.last.insert(rec.user, rec.object) {
            self.count(prev, rec.object);
        }
    }

    /// Up to `n` most likely successors with their transition probability,
    /// ties broken by object id.
    pub fn successors(&self, from: ObjectId, n: usize) -> Vec<(ObjectId, f64)> {
        let Some(next) = self.transitions.get(&from) else {
            return Vec::new();
        };
        let total: u64 = next.values().sum();
        let mut ranked: Vec<(ObjectId, u64)> = next.iter().map(|(o, c)| (*o, *c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.into_iter().take(n).map(|(o, c)| (o, c as f64 / total as f64)).collect()
    }

    /// Plans the likeliest successors of `last.object`, timed like rule
    /// predictions.
    pub fn predict(&self, last: &AccessRecord, prev: Option<&AccessRecord>, cfg: &MinerConfig) -> Vec<PrefetchPlan> {
        let predicted_ts = follow_on(last, prev, cfg.default_period);
        let fire_at = fire_time(last.ts, predicted_ts, cfg.prefetch_offset);
        self.successors(last.object, cfg.top_n)
            .into_iter()
            .map(|(object, _)| PrefetchPlan {
                user: last.user,
                object,
                range: last.range,
                fire_at,
                predicted_ts,
                source: PlanSource::Markov,
            })
            .collect()
    }
}

/// One-shot Markov prediction from an access path.
pub fn markov_predict(
    history: &[ObjectId],
    last: &AccessRecord,
    prev: Option<&AccessRecord>,
    cfg: &MinerConfig,
) -> Vec<PrefetchPlan> {
    MarkovModel::from_path(history).predict(last, prev, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Interval;
    use alloc::vec;

    const A: ObjectId = ObjectId(1);
    const B: ObjectId = ObjectId(2);
    const C: ObjectId = ObjectId(3);

    fn rec(object: ObjectId) -> AccessRecord {
        AccessRecord::new(100.0, UserId(1), object, Interval::new(0, 60).unwrap())
    }

    #[test]
    fn alternating_path_predicts_partner() {
        let m = MarkovModel::from_path(&[A, B, A, B, A]);
        assert_eq!(m.successors(A, 3), vec![(B, 1.0)]);
        let plans = markov_predict(&[A, B, A, B, A], &rec(A), None, &MinerConfig::default());
        assert_eq!(plans.len(), 1);
        assert_eq!((plans[0].object, plans[0].source), (B, PlanSource::Markov));
    }

    #[test]
    fn unseen_state_predicts_nothing() {
        assert!(markov_predict(&[A, B], &rec(C), None, &MinerConfig::default()).is_empty());
    }

    #[test]
    fn equal_counts_tie_break_on_object_id() {
        let plans = markov_predict(&[A, C, A, B], &rec(A), None, &MinerConfig::default());
        let objs: Vec<ObjectId> = plans.iter().map(|p| p.object).collect();
        assert_eq!(objs, vec![B, C]);
    }

    #[test]
    fn paths_are_tracked_per_user() {
        let mut m = MarkovModel::new();
        m.observe(&rec(A));
        let mut other = rec(C);
        other.user = UserId(2);
        m.observe(&other);
        m.observe(&rec(B));
        assert_eq!(m.successors(A, 3), vec![(B, 1.0)]);
        assert!(m.successors(C, 3).is_empty());
    }
}
