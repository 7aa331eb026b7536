//! Prefetch prediction: history-based forecasting for program traffic,
//! association-rule mining for everything else, and the Markov and
//! uniform-mining baselines.

mod arima;
mod engine;
mod fpgrowth;
mod history;
mod markov;
mod mining;

use serde::{Deserialize, Serialize};

use crate::{Error, Interval, ObjectId, Result, Timestamp, UserId, SECONDS_PER_DAY};

pub use arima::{arima_fit_forecast, ArimaFit, ArimaOrder};
pub use engine::{hybrid_dispatch, Model, Observation, PredictionConfig, PredictionEngine};
pub use fpgrowth::{frequent_itemsets, mine_rules, Rule, RuleSet};
pub use history::{predict_next_request, predict_next_request_for};
pub use markov::{markov_predict, MarkovModel};
pub use mining::{predict_by_rules, predict_by_rules_in_context, sessions, SessionTracker};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Inter-arrival gaps fed to the forecaster.
    pub arima_window: usize,
    /// Fraction of the predicted gap to wait before prefetching.
    pub prefetch_offset: f64,
    /// Seconds of history in which `repeat_threshold` requests must occur.
    pub learning_period: i64,
    pub repeat_threshold: usize,
    pub order: ArimaOrder,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            arima_window: 60,
            prefetch_offset: 0.8,
            learning_period: 7 * SECONDS_PER_DAY,
            repeat_threshold: 3,
            order: ArimaOrder::default(),
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arima_window < self.order.min_len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "arima_window {} is shorter than p+d+q+1 = {}",
                self.arima_window,
                self.order.min_len()
            )));
        }
        validate_offset(self.prefetch_offset)?;
        if self.learning_period <= 0 || self.repeat_threshold == 0 {
            return Err(Error::InvalidConfig("learning period and repeat threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinerConfig {
    pub min_support: u64,
    pub min_confidence: f64,
    /// Objects prefetched per prediction.
    pub top_n: usize,
    /// Inactivity that closes a session, in seconds.
    pub session_gap: f64,
    /// Assumed gap to the next request when only one request is known.
    pub default_period: f64,
    pub prefetch_offset: f64,
    /// Seconds between re-mining runs during simulation.
    pub remine_every: f64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            min_support: 30,
            min_confidence: 0.5,
            top_n: 3,
            session_gap: 1_800.0,
            default_period: 3_600.0,
            prefetch_offset: 0.8,
            remine_every: SECONDS_PER_DAY as f64,
        }
    }
}

impl MinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_support == 0 || self.top_n == 0 {
            return Err(Error::InvalidConfig("min_support and top_n must be at least 1".into()));
        }
        if !(self.min_confidence > 0.0 && self.min_confidence <= 1.0) {
            return Err(Error::InvalidConfig("min_confidence must lie in (0, 1]".into()));
        }
        if !(self.session_gap > 0.0 && self.default_period > 0.0 && self.remine_every > 0.0) {
            return Err(Error::InvalidConfig("session gap, default period and re-mining cadence must be positive".into()));
        }
        validate_offset(self.prefetch_offset)
    }
}

fn validate_offset(offset: f64) -> Result<()> {
    if offset > 0.0 && offset <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(alloc::format!("prefetch offset {offset} outside (0, 1]")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlanSource {
    History,
    Mining,
    Markov,
}

/// A predicted request and when to start fetching it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefetchPlan {
    pub user: UserId,
    pub object: ObjectId,
    pub range: Interval,
    pub fire_at: Timestamp,
    pub predicted_ts: Timestamp,
    pub source: PlanSource,
}

/// `last + offset * (predicted - last)`, kept inside `(last, predicted]`.
pub fn fire_time(last: Timestamp, predicted: Timestamp, offset: f64) -> Timestamp {
    let t = last + offset * (predicted - last);
    if t > last {
        t.min(predicted)
    } else {
        predicted
    }
}

/// Next-request time estimated from the last two requests of a user.
pub(crate) fn follow_on(last: &crate::trace::AccessRecord, prev: Option<&crate::trace::AccessRecord>, default_period: f64) -> Timestamp {
    match prev {
        Some(p) if last.ts - p.ts > 0.0 => last.ts + (last.ts - p.ts),
        _ => last.ts + default_period,
    }
}
