//! Engineered feature columns: rolling return moments, t-statistic trend
//! transform, RSI, and MACD.
//!
//! Rolling windows use strictly past values (indices t-l..t-1), so a
//! feature dated t never sees data from t itself. Undefined warm-up
//! entries are NaN; `FeatureFrame::valid_from` is the first date where
//! every column is defined.

use crate::error::{Error, Result};
use crate::market_data::{daily_returns, winsorize, OhlcvSeries};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub lookbacks: Vec<usize>,
    pub alpha: f64,
    pub rsi_window: usize,
    /// (fast, slow, signal) EMA spans.
    pub macd_spans: (usize, usize, usize),
    /// Winsorization quantiles applied to the return series feeding the
    /// rolling moments; `None` disables (prices are never winsorized).
    pub winsor_quantiles: Option<(f64, f64)>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            lookbacks: vec![50, 100, 300],
            alpha: 1.0,
            rsi_window: 14,
            macd_spans: (12, 26, 9),
            winsor_quantiles: Some((0.01, 0.99)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub ticker: String,
    pub dates: Vec<NaiveDate>,
    /// Canonically ordered (name, date-aligned values) pairs.
    pub columns: Vec<(String, Vec<f64>)>,
    pub valid_from: usize,
}

impl FeatureFrame {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    /// Feature row at date index t, in column order.
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|(_, v)| v[t]).collect()
    }
}

fn check_window(len: usize, window: usize) -> Result<()> {
    if window < 2 {
        return Err(Error::InvalidConfig(format!("window must be >= 2, got {window}")));
    }
    if window > len {
        return Err(Error::WindowTooLarge { window, len });
    }
    Ok(())
}

/// Rolling mean of the `window` strictly past values; NaN before index
/// `window`.
pub fn rolling_sma(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(values.len(), window)?;
    let mut out = vec![f64::NAN; values.len()];
    for t in window..values.len() {
        out[t] = values[t - window..t].iter().sum::<f64>() / window as f64;
    }
    Ok(out)
}

/// Rolling sample standard deviation (divisor window-1) over the same
/// strictly past window as `rolling_sma`.
pub fn rolling_vol(values: &[f64], window: usize) -> Result<Vec<f64>> {
    check_window(values.len(), window)?;
    let mut out = vec![f64::NAN; values.len()];
    for t in window..values.len() {
        out[t] = window_std(&values[t - window..t]);
    }
    Ok(out)
}

/// Sample std over a full window; exactly 0 for a constant window (summing
/// identical values can otherwise round the mean by an ulp and leak a tiny
/// spurious deviation).
pub(crate) fn window_std(w: &[f64]) -> f64 {
    if w.iter().all(|&v| v == w[0]) {
        return 0.0;
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let ss: f64 = w.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (w.len() - 1) as f64).sqrt()
}

/// tanh(alpha * T) where T is the rolling t-statistic mean/(std/sqrt(l)).
/// Zero-variance windows map to 0.
pub fn tstat_signal(returns: &[f64], window: usize, alpha: f64) -> Result<Vec<f64>> {
    check_window(returns.len(), window)?;
    if alpha <= 0.0 {
        return Err(Error::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
    }
    let mut out = vec![f64::NAN; returns.len()];
    for t in window..returns.len() {
        let w = &returns[t - window..t];
        let mean = w.iter().sum::<f64>() / window as f64;
        let std = window_std(w);
        out[t] = if std > 0.0 {
            (alpha * mean / (std / (window as f64).sqrt())).tanh()
        } else {
            0.0
        };
    }
    Ok(out)
}

/// Wilder RSI: exponential averages of gains and losses with smoothing
/// 1/window, seeded by the simple mean of the first `window` changes.
pub fn rsi(prices: &[f64], window: usize) -> Result<Vec<f64>> {
    let n = prices.len();
    if window < 1 {
        return Err(Error::InvalidConfig("rsi window must be >= 1".into()));
    }
    if n <= window {
        return Err(Error::TooShort { needed: window + 1, got: n });
    }
    let gains: Vec<f64> = prices.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let losses: Vec<f64> = prices.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect();

    let mut out = vec![f64::NAN; n];
    let mut avg_gain = gains[..window].iter().sum::<f64>() / window as f64;
    let mut avg_loss = losses[..window].iter().sum::<f64>() / window as f64;
    out[window] = rsi_value(avg_gain, avg_loss);
    for t in window + 1..n {
        let k = 1.0 / window as f64;
        avg_gain += k * (gains[t - 1] - avg_gain);
        avg_loss += k * (losses[t - 1] - avg_loss);
        out[t] = rsi_value(avg_gain, avg_loss);
    }
    Ok(out)
}

fn rsi_value(avg_gain: f64, avg_loss: f64) -> f64 {
    if avg_loss == 0.0 {
        if avg_gain > 0.0 {
            100.0
        } else {
            50.0
        }
    } else {
        100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    }
}

fn ema(values: &[f64], span: usize) -> Vec<f64> {
    let k = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut e = values[0];
    out.push(e);
    for &v in &values[1..] {
        e += k * (v - e);
        out.push(e);
    }
    out
}

/// MACD line and its signal line. EMAs use smoothing 2/(span+1) and are
/// seeded with the first observation, so both outputs are defined from
/// index 0.
pub fn macd(
    prices: &[f64],
    fast: usize,
    slow: usize,
    signal: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if fast >= slow {
        return Err(Error::BadSpans { fast, slow });
    }
    if prices.len() <= slow + signal {
        return Err(Error::TooShort { needed: slow + signal + 1, got: prices.len() });
    }
    let ema_fast = ema(prices, fast);
    let ema_slow = ema(prices, slow);
    let macd_line: Vec<f64> = ema_fast.iter().zip(&ema_slow).map(|(f, s)| f - s).collect();
    let signal_line = ema(&macd_line, signal);
    Ok((macd_line, signal_line))
}

/// Assemble the full per-ticker feature frame: for each lookback l the
/// columns sma_l / vol_l / tstat_l over (optionally winsorized) daily
/// returns, plus rsi and macd/macd_signal over raw adjusted closes.
pub fn build_feature_frame(series: &OhlcvSeries, config: &FeatureConfig) -> Result<FeatureFrame> {
    let prices = series.adj_closes();
    let n = prices.len();
    let raw_returns = daily_returns(series)?;
    let returns = match config.winsor_quantiles {
        Some((lo, hi)) => winsorize(&raw_returns, lo, hi)?,
        None => raw_returns,
    };

    // Return-indexed rolling outputs are re-aligned to dates: the return at
    // date t is returns[t-1], so a strictly-past window ending at return
    // index t-1 belongs to date t.
    let to_dates = |v: Vec<f64>| -> Vec<f64> {
        let mut out = vec![f64::NAN; n];
        out[1..n].copy_from_slice(&v[..n - 1]);
        out
    };

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for &l in &config.lookbacks {
        columns.push((format!("sma_{l}"), to_dates(rolling_sma(&returns, l)?)));
        columns.push((format!("vol_{l}"), to_dates(rolling_vol(&returns, l)?)));
        columns.push((
            format!("tstat_{l}"),
            to_dates(tstat_signal(&returns, l, config.alpha)?),
        ));
    }
    columns.push((format!("rsi_{}", config.rsi_window), rsi(&prices, config.rsi_window)?));
    let (fast, slow, sig) = config.macd_spans;
    let (macd_line, signal_line) = macd(&prices, fast, slow, sig)?;
    columns.push(("macd".to_string(), macd_line));
    columns.push(("macd_signal".to_string(), signal_line));

    let valid_from = (0..n)
        .find(|&t| columns.iter().all(|(_, v)| v[t].is_finite()))
        .ok_or(Error::TooShort {
            needed: config.lookbacks.iter().max().copied().unwrap_or(0) + 2,
            got: n,
        })?;

    Ok(FeatureFrame {
        ticker: series.ticker.clone(),
        dates: series.dates(),
        columns,
        valid_from,
    })
}
