//! Strategy dispatch and the stateful predictor used during replay.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::classifier::{classify_request, ClassifierConfig, RequestClass, UserActivity, UserClass};
use crate::trace::{AccessRecord, RequestSequence};
use crate::{ObjectId, Result, Timestamp, UserId};

use super::{
    mine_rules, predict_by_rules_in_context, predict_next_request, MarkovModel, MinerConfig, PredictorConfig,
    PrefetchPlan, RuleSet, SessionTracker,
};

/// Which predictor drives prefetching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Model {
    /// First-order Markov successors for every request.
    Markov,
    /// Association rules for every request.
    UniformMining,
    /// History forecasting for program objects, streaming for real-time
    /// requests, rules for the rest.
    Hybrid,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictionConfig {
    pub predictor: PredictorConfig,
    pub miner: MinerConfig,
    pub classifier: ClassifierConfig,
}

impl PredictionConfig {
    pub fn validate(&self) -> Result<()> {
        self.predictor.validate()?;
        self.miner.validate()?;
        self.classifier.validate()
    }
}

struct Request<'a> {
    last: &'a AccessRecord,
    prev: Option<&'a AccessRecord>,
    stream: &'a [AccessRecord],
    class: RequestClass,
    program: bool,
    context: &'a BTreeSet<ObjectId>,
}

fn hybrid(req: &Request<'_>, rules: &RuleSet, cfg: &PredictionConfig) -> Vec<PrefetchPlan> {
    if req.class == RequestClass::RealTime {
        return Vec::new();
    }
    if req.program {
        if let Some(plan) = predict_next_request(req.stream, &cfg.predictor) {
            return alloc::vec![plan];
        }
    }
    predict_by_rules_in_context(req.last, req.prev, req.context, rules, &cfg.miner)
}

/// HPM dispatch for the newest request of `seq`: history forecasting when
/// `class` marks the object as program traffic, nothing for real-time
/// requests, and rules (with the current session as context) otherwise.
pub fn hybrid_dispatch(
    seq: &RequestSequence,
    class: &UserClass,
    rules: &RuleSet,
    cfg: &PredictionConfig,
) -> Vec<PrefetchPlan> {
    let Some((last, earlier)) = seq.records.split_last() else {
        return Vec::new();
    };
    let stream: Vec<AccessRecord> = seq.for_object(last.object).copied().collect();
    let prev_same = stream.len().checked_sub(2).map(|i| &stream[i]);
    let req_class = classify_request(prev_same, last, &cfg.classifier).unwrap_or(RequestClass::Unclassified);
    let mut context = BTreeSet::new();
    let mut t = last.ts;
    for r in seq.records.iter().rev() {
        if t - r.ts > cfg.miner.session_gap {
            break;
        }
        context.insert(r.object);
        t = r.ts;
    }
    let req = Request {
        last,
        prev: earlier.last(),
        stream: &stream,
        class: req_class,
        program: class.is_program_for(last.object),
        context: &context,
    };
    hybrid(&req, rules, cfg)
}

/// Class of an observed request and the prefetches it triggers.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub class: RequestClass,
    pub plans: Vec<PrefetchPlan>,
}

#[derive(Default)]
struct UserState {
    activity: UserActivity,
    last: Option<AccessRecord>,
}

/// Online predictor fed with requests in time order.
pub struct PredictionEngine {
    model: Model,
    cfg: PredictionConfig,
    users: BTreeMap<UserId, UserState>,
    streams: BTreeMap<(UserId, ObjectId), VecDeque<AccessRecord>>,
    sessions: SessionTracker,
    transactions: Vec<Vec<ObjectId>>,
    rules: RuleSet,
    next_mine: Option<Timestamp>,
    markov: MarkovModel,
    mining_runs: usize,
}

impl PredictionEngine {
    pub fn new(model: Model, cfg: PredictionConfig) -> Self {
        Self {
            model,
            sessions: SessionTracker::new(cfg.miner.session_gap),
            cfg,
            users: BTreeMap::new(),
            streams: BTreeMap::new(),
            transactions: Vec::new(),
            rules: RuleSet::default(),
            next_mine: None,
            markov: MarkovModel::new(),
            mining_runs: 0,
        }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn mining_runs(&self) -> usize {
        self.mining_runs
    }

    /// Re-mines rules from all sessions closed before each due time up to `now`.
    fn remine_until(&mut self, now: Timestamp) {
        let every = self.cfg.miner.remine_every;
        let due = *self.next_mine.get_or_insert(now + every);
        if now < due {
            return;
        }
        let mut at = due;
        while at + every <= now {
            at += every;
        }
        let closed = self.sessions.close_idle(at);
        self.transactions.extend(closed.into_iter().map(|(_, s)| s));
        self.rules = mine_rules(&self.transactions, &self.cfg.miner);
        self.mining_runs += 1;
        self.next_mine = Some(at + every);
    }

    pub fn observe(&mut self, rec: &AccessRecord) -> Observation {
        if self.model != Model::Markov {
            self.remine_until(rec.ts);
            if let Some((_, closed)) = self.sessions.observe(rec) {
                self.transactions.push(closed);
            }
        }

        let keep = self.cfg.predictor.arima_window + 1;
        let horizon = rec.ts - self.cfg.predictor.learning_period as f64;
        let stream = self.streams.entry((rec.user, rec.object)).or_default();
        let class = classify_request(stream.back(), rec, &self.cfg.classifier).unwrap_or(RequestClass::Unclassified);
        stream.push_back(*rec);
        while stream.len() > keep && stream.front().is_some_and(|r| r.ts < horizon) {
            stream.pop_front();
        }

        let user = self.users.entry(rec.user).or_default();
        user.activity.record(rec);
        let prev = user.last.replace(*rec);

        let plans = match self.model {
            Model::Markov => {
                self.markov.observe(rec);
                self.markov.predict(rec, prev.as_ref(), &self.cfg.miner)
            }
            Model::UniformMining => {
                let context = self.sessions.context(rec.user).cloned().unwrap_or_default();
                predict_by_rules_in_context(rec, prev.as_ref(), &context, &self.rules, &self.cfg.miner)
            }
            Model::Hybrid => {
                let program = user.activity.program_objects(rec.ts, &self.cfg.classifier).contains(&rec.object);
                let stream = self.streams.get_mut(&(rec.user, rec.object)).unwrap();
                let context = self.sessions.context(rec.user).cloned().unwrap_or_default();
                let req = Request {
                    last: rec,
                    prev: prev.as_ref(),
                    stream: stream.make_contiguous(),
                    class,
                    program,
                    context: &context,
                };
                hybrid(&req, &self.rules, &self.cfg)
            }
        };
        Observation { class, plans }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prediction::{PlanSource, Rule};
    use crate::{Interval, SECONDS_PER_DAY};
    use alloc::vec;

    fn rec(ts: f64, user: u32, object: u32, start: i64, end: i64) -> AccessRecord {
        AccessRecord::new(ts, UserId(user), ObjectId(object), Interval::new(start, end).unwrap())
    }

    fn rules() -> RuleSet {
        RuleSet::from_rules(vec![Rule { antecedent: vec![ObjectId(1)], consequent: ObjectId(2), support: 40, confidence: 0.9 }])
    }

    #[test]
    fn program_user_gets_one_history_plan() {
        let records: Vec<AccessRecord> =
            (1..=24).map(|k| rec((k * 3_600) as f64, 1, 1, (k - 1) * 3_600, k * 3_600)).collect();
        let seq = RequestSequence::new(UserId(1), records);
        let class = UserClass { program_objects: [(ObjectId(1), 0.0)].into_iter().collect() };
        let plans = hybrid_dispatch(&seq, &class, &rules(), &PredictionConfig::default());
        assert_eq!(plans.len(), 1);
        assert_eq!(plans[0].source, PlanSource::History);
    }

    #[test]
    fn human_user_gets_rule_plans() {
        let seq = RequestSequence::new(UserId(1), vec![rec(100.0, 1, 1, 0, 60)]);
        let plans = hybrid_dispatch(&seq, &UserClass::default(), &rules(), &PredictionConfig::default());
        assert_eq!(plans.len(), 1);
        assert_eq!((plans[0].source, plans[0].object), (PlanSource::Mining, ObjectId(2)));
    }

    #[test]
    fn real_time_user_gets_nothing() {
        let records: Vec<AccessRecord> = (1..=10).map(|k| rec((k * 60) as f64, 1, 1, (k - 1) * 60, k * 60)).collect();
        let seq = RequestSequence::new(UserId(1), records);
        let class = UserClass { program_objects: [(ObjectId(1), 0.0)].into_iter().collect() };
        assert!(hybrid_dispatch(&seq, &class, &rules(), &PredictionConfig::default()).is_empty());
    }

    #[test]
    fn engine_switches_to_history_after_pattern_week() {
        let mut engine = PredictionEngine::new(Model::Hybrid, PredictionConfig::default());
        let mut first_history = None;
        for k in 1..=(10 * 24) {
            let end = k * 3_600;
            let obs = engine.observe(&rec(end as f64, 1, 1, end - 3_600, end));
            if first_history.is_none() && obs.plans.iter().any(|p| p.source == PlanSource::History) {
                first_history = Some(end);
            }
        }
        // the first hour of day 0 is requested at 01:00, so day 0 counts
        assert_eq!(first_history, Some(7 * SECONDS_PER_DAY));
        assert!(engine.mining_runs() > 0);
    }

    #[test]
    fn markov_engine_learns_user_paths() {
        let mut engine = PredictionEngine::new(Model::Markov, PredictionConfig::default());
        engine.observe(&rec(0.0, 1, 1, 0, 60));
        engine.observe(&rec(10.0, 1, 2, 0, 60));
        let obs = engine.observe(&rec(20.0, 2, 1, 0, 60));
        assert_eq!(obs.plans.len(), 1);
        assert_eq!(obs.plans[0].object, ObjectId(2));
        assert_eq!(obs.class, RequestClass::Unclassified);
    }
}
