//! Forecasting the next request of a periodic (program) stream.

use alloc::vec::Vec;

use crate::trace::{AccessRecord, RequestSequence};
use crate::Interval;

use super::{arima_fit_forecast, fire_time, PlanSource, PredictorConfig, PrefetchPlan};

/// Predicts the next request of one user/object stream. `stream` holds the
/// stream's past requests in time order, newest last.
///
/// Returns `None` when the stream was requested fewer than
/// `repeat_threshold` times within the learning period before its last
/// request.
pub fn predict_next_request(stream: &[AccessRecord], cfg: &PredictorConfig) -> Option<PrefetchPlan> {
    let last = stream.last()?;
    let horizon = last.ts - cfg.learning_period as f64;
    let recent = stream.iter().rev().take_while(|r| r.ts >= horizon).count();
    if recent < cfg.repeat_threshold || stream.len() < 2 {
        return None;
    }
    let tail = &stream[stream.len().saturating_sub(cfg.arima_window + 1)..];
    let gaps: Vec<f64> = tail.windows(2).map(|w| w[1].ts - w[0].ts).collect();
    let last_gap = *gaps.last()?;
    let mut gap = if gaps.len() >= cfg.order.min_len() {
        arima_fit_forecast(&gaps, cfg.order).unwrap_or(f64::NAN)
    } else {
        gaps.iter().sum::<f64>() / gaps.len() as f64
    };
    if !(gap.is_finite() && gap > 0.0) {
        gap = last_gap;
    }
    if !(gap > 0.0) {
        return None;
    }
    let predicted_ts = last.ts + gap;

    // Windows slide along the observation axis with the user's own stride;
    // with jittered submissions the wall-clock gap would drift off it.
    let prev = &stream[stream.len() - 2];
    let stride = last.range.start - prev.range.start;
    let shift = if stride > 0 { stride } else { libm::round(gap) as i64 };
    let range = Interval::new(last.range.start + shift, last.range.end + shift)?;
    Some(PrefetchPlan {
        user: last.user,
        object: last.object,
        range,
        fire_at: fire_time(last.ts, predicted_ts, cfg.prefetch_offset),
        predicted_ts,
        source: PlanSource::History,
    })
}

/// Convenience over a whole user sequence: predicts the next request for the
/// object of the sequence's latest record.
pub fn predict_next_request_for(seq: &RequestSequence, cfg: &PredictorConfig) -> Option<PrefetchPlan> {
    let object = seq.records.last()?.object;
    let stream: Vec<AccessRecord> = seq.for_object(object).copied().collect();
    predict_next_request(&stream, cfg)
}
