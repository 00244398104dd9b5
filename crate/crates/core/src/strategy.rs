//! Baseline trend-following strategy: price-vs-SMA signal, normalized
//! positioning capped at +/-1, and cost-adjusted daily P&L.
//!
//! P&L is additive in return units: the position decided at t-1 earns the
//! return of day t, and weight changes pay `cost_bps` per unit of turnover
//! on the day they happen. Cumulative P&L is a plain prefix sum, not a
//! compounded equity curve.

use crate::error::{Error, Result};
use crate::features::rolling_sma;
use crate::market_data::{daily_returns, OhlcvSeries};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub const DEFAULT_COST_BPS: f64 = 2.0;
pub const DEFAULT_SIGNAL_LOOKBACK: usize = 100;

/// Raw and normalized trend signal for one ticker. Entries are NaN during
/// warm-up: raw needs `lookback` observations, normalized needs
/// `2 * lookback`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignalSeries {
    pub dates: Vec<NaiveDate>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub lookback: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositionSeries {
    pub dates: Vec<NaiveDate>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PnlSeries {
    pub dates: Vec<NaiveDate>,
    pub daily: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub cost_bps: f64,
}

impl PnlSeries {
    pub fn final_cumulative(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Trend signal S_t = (P_t - SMA_{t,l}) / SMA_{t,l} over strictly past
/// prices, then standardized by its own rolling mean and std over the same
/// lookback. Zero rolling std maps to 0.
pub fn trend_signal(series: &OhlcvSeries, lookback: usize) -> Result<SignalSeries> {
    let prices = series.adj_closes();
    let n = prices.len();
    if n < 2 * lookback {
        return Err(Error::TooShort { needed: 2 * lookback, got: n });
    }
    let sma = rolling_sma(&prices, lookback)?;
    let raw: Vec<f64> = (0..n)
        .map(|t| if sma[t].is_finite() { (prices[t] - sma[t]) / sma[t] } else { f64::NAN })
        .collect();

    let mut normalized = vec![f64::NAN; n];
    for t in 2 * lookback..n {
        let w = &raw[t - lookback..t];
        let mean = w.iter().sum::<f64>() / lookback as f64;
        let std = crate::features::window_std(w);
        normalized[t] = if std > 0.0 { (raw[t] - mean) / std } else { 0.0 };
    }

    Ok(SignalSeries { dates: series.dates(), raw, normalized, lookback })
}

/// w_t = clamp(normalized_t, -1, 1); warm-up days carry zero weight.
pub fn positions_from_signal(signal: &SignalSeries) -> PositionSeries {
    let weights = signal
        .normalized
        .iter()
        .map(|&s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
        .collect();
    PositionSeries { dates: signal.dates.clone(), weights }
}

/// Daily P&L: daily_t = w_{t-1} * r_t - (b/10000) * |w_t - w_{t-1}| with
/// w_{-1} = 0.
pub fn pnl(weights: &PositionSeries, returns: &[f64], cost_bps: f64) -> Result<PnlSeries> {
    if weights.weights.len() != returns.len() {
        return Err(Error::LengthMismatch { left: weights.weights.len(), right: returns.len() });
    }
    if cost_bps < 0.0 {
        return Err(Error::InvalidConfig(format!("cost_bps must be >= 0, got {cost_bps}")));
    }
    let cost = cost_bps / 10_000.0;
    let mut daily = Vec::with_capacity(returns.len());
    let mut cumulative = Vec::with_capacity(returns.len());
    let mut prev_w = 0.0;
    let mut cum = 0.0;
    for (&w, &r) in weights.weights.iter().zip(returns) {
        let p = prev_w * r - cost * (w - prev_w).abs();
        cum += p;
        daily.push(p);
        cumulative.push(cum);
        prev_w = w;
    }
    Ok(PnlSeries { dates: weights.dates.clone(), daily, cumulative, cost_bps })
}

/// Full baseline run: signal -> positions -> cost-adjusted P&L over the
/// whole series. The day-0 return slot is 0; it is never earned because
/// w_{-1} = 0.
pub fn backtest_baseline(series: &OhlcvSeries, lookback: usize, cost_bps: f64) -> Result<PnlSeries> {
    let signal = trend_signal(series, lookback)?;
    let positions = positions_from_signal(&signal);
    let mut returns = vec![0.0];
    returns.extend(daily_returns(series)?);
    pnl(&positions, &returns, cost_bps)
}
