//! ARIMA(p, d, q) fitted by conditional least squares.
//!
//! Pure autoregressive models (`q == 0`) are an ordinary least-squares fit
//! of the differenced series on its own lags plus an intercept. Moving-average
//! terms use the two-stage Hannan–Rissanen regression: residuals of a long
//! AR fit stand in for the unobserved innovations.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub const fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    pub fn min_len(&self) -> usize {
        self.p + self.d + self.q + 1
    }
}

impl Default for ArimaOrder {
    fn default() -> Self {
        Self::new(1, 1, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArimaFit {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Differenced series the model was fitted on.
    differenced: Vec<f64>,
    residuals: Vec<f64>,
    /// Last value of each differencing level, original series first.
    tails: Vec<f64>,
}

/// Least squares via the normal equations. Columns that are numerically
/// dependent on earlier ones get a zero coefficient.
pub(crate) fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = rows.first().map_or(0, Vec::len);
    let mut a = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for (row, &target) in rows.iter().zip(y) {
        for i in 0..k {
            b[i] += row[i] * target;
            for j in 0..k {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = if scale > 0.0 { scale * 1e-12 } else { f64::MIN_POSITIVE };
    let mut pivot_row = vec![None; k];
    let mut r = 0;
    for c in 0..k {
        if r == k {
            break;
        }
        let (best, val) = (r..k)
            .map(|i| (i, a[i][c].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        a.swap(r, best);
        b.swap(r, best);
        for i in r + 1..k {
            let f = a[i][c] / a[r][c];
            if f != 0.0 {
                for j in c..k {
                    a[i][j] -= f * a[r][j];
                }
                b[i] -= f * b[r];
            }
        }
        pivot_row[c] = Some(r);
        r += 1;
    }
    let mut x = vec![0.0; k];
    for c in (0..k).rev() {
        if let Some(r) = pivot_row[c] {
            let s: f64 = (c + 1..k).map(|j| a[r][j] * x[j]).sum();
            x[c] = (b[r] - s) / a[r][c];
        }
    }
    x
}

fn difference(series: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut level = series.to_vec();
    let mut tails = Vec::with_capacity(d + 1);
    for _ in 0..d {
        tails.push(*level.last().expect("non-empty level"));
        level = level.windows(2).map(|w| w[1] - w[0]).collect();
    }
    tails.push(level.last().copied().unwrap_or(0.0));
    (level, tails)
}

/// Regresses `y[t]` on an intercept, `p` lags of `y` and `q` lags of `e`.
fn regress(y: &[f64], e: &[f64], p: usize, q: usize, start: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for t in start..y.len() {
        let mut row = Vec::with_capacity(1 + p + q);
        row.push(1.0);
        row.extend((1..=p).map(|k| y[t - k]));
        row.extend((1..=q).map(|k| e[t - k]));
        rows.push(row);
        targets.push(y[t]);
    }
    if rows.is_empty() {
        return (0.0, vec![0.0; p], vec![0.0; q]);
    }
    let beta = least_squares(&rows, &targets);
    (beta[0], beta[1..=p].to_vec(), beta[1 + p..].to_vec())
}

fn residuals(y: &[f64], intercept: f64, ar: &[f64], ma: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; y.len()];
    for t in 0..y.len() {
        let mut pred = intercept;
        for (k, phi) in ar.iter().enumerate() {
            if t > k {
                pred += phi * y[t - k - 1];
            }
        }
        for (k, theta) in ma.iter().enumerate() {
            if t > k {
                pred += theta * e[t - k - 1];
            }
        }
        let lags = ar.len().max(ma.len());
        e[t] = if t >= lags { y[t] - pred } else { 0.0 };
    }
    e
}

impl ArimaFit {
    pub fn fit(series: &[f64], order: ArimaOrder) -> Result<Self> {
        let needed = order.min_len();
        if series.len() < needed {
            return Err(Error::SeriesTooShort { needed, got: series.len() });
        }
        if series.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSeries);
        }
        let (y, tails) = difference(series, order.d);
        let ArimaOrder { p, q, .. } = order;
        let (intercept, ar, ma) = if q == 0 {
            regress(&y, &[], p, 0, p)
        } else {
            // stage one: long autoregression for innovation estimates
            let long = (p + q).max((y.len() / 4).min(10));
            let start2 = long + p.max(q);
            if y.len() > start2 + p + q + 1 {
                let (c0, phi0, _) = regress(&y, &[], long, 0, long);
                let e0 = residuals(&y, c0, &phi0, &[]);
                regress(&y, &e0, p, q, start2)
            } else {
                let (c, phi, _) = regress(&y, &[], p, 0, p);
                (c, phi, vec![0.0; q])
            }
        };
        let residuals = residuals(&y, intercept, &ar, &ma);
        Ok(Self { order, intercept, ar, ma, differenced: y, residuals, tails })
    }

    /// One-step-ahead forecast on the original scale.
    pub fn forecast(&self) -> f64 {
        let y = &self.differenced;
        let e = &self.residuals;
        let n = y.len();
        let mut next = self.intercept;
        for (k, phi) in self.ar.iter().enumerate() {
            if n > k {
                next += phi * y[n - 1 - k];
            }
        }
        for (k, theta) in self.ma.iter().enumerate() {
            if n > k {
                next += theta * e[n - 1 - k];
            }
        }
        // integrate back through each differencing level
        for level in (0..self.order.d).rev() {
            next += self.tails[level];
        }
        next
    }
}

/// Fits the model and returns the one-step-ahead forecast.
pub fn arima_fit_forecast(series: &[f64], order: ArimaOrder) -> Result<f64> {
    Ok(ArimaFit::fit(series, order)?.forecast())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_with_differencing_forecasts_constant() {
        let series = vec![3_600.0; 60];
        assert_eq!(arima_fit_forecast(&series, ArimaOrder::new(1, 1, 0)).unwrap(), 3_600.0);
    }

    #[test]
    fn random_walk_with_drift() {
        let series: Vec<f64> = (0..60).map(|t| 100.0 * t as f64).collect();
        let f = arima_fit_forecast(&series, ArimaOrder::new(0, 1, 0)).unwrap();
        assert!((f - 6_000.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn short_and_non_finite_series_are_rejected() {
        assert_eq!(
            arima_fit_forecast(&[1.0, 2.0], ArimaOrder::new(1, 1, 0)),
            Err(Error::SeriesTooShort { needed: 3, got: 2 })
        );
        assert_eq!(
            arima_fit_forecast(&[1.0, f64::NAN, 2.0, 3.0], ArimaOrder::new(1, 1, 0)),
            Err(Error::NonFiniteSeries)
        );
    }

    #[test]
    fn second_order_differencing_extrapolates_quadratics() {
        let series: Vec<f64> = (0..20).map(|t| (t * t) as f64).collect();
        let f = arima_fit_forecast(&series, ArimaOrder::new(0, 2, 0)).unwrap();
        assert!((f - 400.0).abs() < 1e-9, "{f}");
    }

    #[test]
    fn moving_average_terms_fit_without_blowing_up() {
        // deterministic pseudo-noise
        let mut e = 0.3f64;
        let series: Vec<f64> = (0..80)
            .map(|t| {
                e = (e * 9301.0 + 49297.0) % 233280.0 / 233280.0;
                3_600.0 + 10.0 * (e - 0.5) + (t % 2) as f64
            })
            .collect();
        let f = arima_fit_forecast(&series, ArimaOrder::new(1, 0, 1)).unwrap();
        assert!(f.is_finite() && (3_500.0..3_700.0).contains(&f), "{f}");
    }

    #[test]
    fn least_squares_drops_degenerate_columns() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]];
        let beta = least_squares(&rows, &[2.0, 2.0, 2.0]);
        assert_eq!(beta, vec![2.0, 0.0]);
    }
}
