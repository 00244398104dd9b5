//! Supervised sample construction: rolling standardization, outlier
//! clipping, fixed-length windows, differenced targets, and chronological
//! splits.
//!
//! A sample whose window ends at date t carries the target
//! delta_{t+1} = S~_{t+1} - S~_t, so the target is strictly in the future
//! relative to everything inside the window.

use crate::error::{Error, Result};
use crate::features::{build_feature_frame, window_std, FeatureConfig, FeatureFrame};
use crate::market_data::{daily_returns, OhlcvSeries};
use crate::strategy::{trend_signal, SignalSeries};
use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitLabel::Train => write!(f, "train"),
            SplitLabel::Validation => write!(f, "validation"),
            SplitLabel::Test => write!(f, "test"),
        }
    }
}

/// What the model is asked to forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Next-day trend difference S~_{t+1} - S~_t (default).
    SignalDiff,
    /// Next-day raw return.
    Return,
}

#[derive(Debug, Clone)]
pub struct Sample {
    /// T x m standardized, clipped feature window ending at `date`.
    pub window: Array2<f64>,
    /// Forecast target attached to this window (future relative to it).
    pub target: f64,
    pub date: NaiveDate,
    /// Normalized trend signal at the window end.
    pub base_signal: f64,
    /// Realized next-day return r_{t+1}; consumed by the Sharpe loss and
    /// by P&L wiring.
    pub next_return: f64,
}

/// Per-feature rolling mean/std series used for standardization; kept so
/// model inputs can be reproduced or audited.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingState {
    pub feature_names: Vec<String>,
    pub window: usize,
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SampleSet {
    pub ticker: String,
    pub samples: Vec<Sample>,
    pub splits: Vec<SplitLabel>,
    pub scaling_state: ScalingState,
}

impl SampleSet {
    pub fn indices_of(&self, label: SplitLabel) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == label).then_some(i))
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.scaling_state.feature_names.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// Input window length T; also the rolling-standardization window.
    pub window: usize,
    pub clip: (f64, f64),
    pub fractions: (f64, f64, f64),
    pub signal_lookback: usize,
    pub target_mode: TargetMode,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            window: 100,
            clip: (-5.0, 5.0),
            fractions: (0.70, 0.15, 0.15),
            signal_lookback: crate::strategy::DEFAULT_SIGNAL_LOOKBACK,
            target_mode: TargetMode::SignalDiff,
        }
    }
}

/// Next-day trend differences aligned to the window-end date:
/// out[t] = S~_{t+1} - S~_t where both are defined, else NaN.
pub fn make_target(signal: &SignalSeries) -> Result<Vec<f64>> {
    let s = &signal.normalized;
    let defined = s.iter().filter(|v| v.is_finite()).count();
    if defined < 2 {
        return Err(Error::TooShort { needed: 2, got: defined });
    }
    let mut out = vec![f64::NAN; s.len()];
    for t in 0..s.len().saturating_sub(1) {
        if s[t].is_finite() && s[t + 1].is_finite() {
            out[t] = s[t + 1] - s[t];
        }
    }
    Ok(out)
}

/// Standardize each feature by its trailing mean/std over the window
/// t-T+1..t (current value included). Zero-std windows map to 0.
pub fn rolling_standardize(
    frame: &FeatureFrame,
    window: usize,
) -> Result<(FeatureFrame, ScalingState)> {
    if window < 2 {
        return Err(Error::TooShort { needed: 2, got: window });
    }
    let n = frame.dates.len();
    let mut columns = Vec::with_capacity(frame.columns.len());
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for (name, col) in &frame.columns {
        let mut out = vec![f64::NAN; n];
        let mut mean_col = vec![f64::NAN; n];
        let mut std_col = vec![f64::NAN; n];
        for t in 0..n {
            if t + 1 < window || t < frame.valid_from + window - 1 {
                continue;
            }
            let w = &col[t + 1 - window..=t];
            let mean = w.iter().sum::<f64>() / window as f64;
            let std = window_std(w);
            mean_col[t] = mean;
            std_col[t] = std;
            out[t] = if std > 0.0 { (col[t] - mean) / std } else { 0.0 };
        }
        columns.push((name.clone(), out));
        means.push(mean_col);
        stds.push(std_col);
    }
    let valid_from = frame.valid_from + window - 1;
    if valid_from >= n {
        return Err(Error::TooShort { needed: valid_from + 1, got: n });
    }
    Ok((
        FeatureFrame {
            ticker: frame.ticker.clone(),
            dates: frame.dates.clone(),
            columns,
            valid_from,
        },
        ScalingState {
            feature_names: frame.columns.iter().map(|(n, _)| n.clone()).collect(),
            window,
            means,
            stds,
        },
    ))
}

/// Elementwise clamp; NaN passes through untouched.
pub fn clip(values: &mut [f64], lo: f64, hi: f64) {
    debug_assert!(lo < hi);
    for v in values {
        if v.is_finite() {
            *v = v.clamp(lo, hi);
        }
    }
}

/// Contiguous chronological split labels with boundaries at
/// floor(n * cumulative fraction); the remainder lands in the test block.
pub fn chrono_split(
    dates: &[NaiveDate],
    fractions: (f64, f64, f64),
) -> Result<Vec<SplitLabel>> {
    let (a, b, c) = fractions;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let n = dates.len();
    if n < 10 {
        return Err(Error::TooFewSamples { needed: 10, got: n });
    }
    if dates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::NotChronological);
    }
    let b1 = (n as f64 * a).floor() as usize;
    let b2 = (n as f64 * (a + b)).floor() as usize;
    Ok((0..n)
        .map(|i| {
            if i < b1 {
                SplitLabel::Train
            } else if i < b2 {
                SplitLabel::Validation
            } else {
                SplitLabel::Test
            }
        })
        .collect())
}

/// Materialize T x m windows over the valid rows of a (standardized)
/// frame. Window k ends at valid row k + T - 1; count = n_valid - T + 1.
pub fn windows(frame: &FeatureFrame, window: usize) -> Result<Vec<Array2<f64>>> {
    let n_valid = frame.dates.len() - frame.valid_from;
    if n_valid < window {
        return Err(Error::TooShort { needed: window, got: n_valid });
    }
    let m = frame.n_features();
    let mut out = Vec::with_capacity(n_valid - window + 1);
    for end in frame.valid_from + window - 1..frame.dates.len() {
        let mut w = Array2::zeros((window, m));
        for (i, t) in (end + 1 - window..=end).enumerate() {
            for (j, (_, col)) in frame.columns.iter().enumerate() {
                w[[i, j]] = col[t];
            }
        }
        out.push(w);
    }
    Ok(out)
}

/// Full per-ticker sample construction: features -> rolling standardize ->
/// clip -> windows + targets + chronological split labels.
pub fn build_samples(
    series: &OhlcvSeries,
    feature_config: &FeatureConfig,
    config: &DatasetConfig,
) -> Result<SampleSet> {
    let frame = build_feature_frame(series, feature_config)?;
    let (mut standardized, scaling_state) = rolling_standardize(&frame, config.window)?;
    for (_, col) in &mut standardized.columns {
        clip(col, config.clip.0, config.clip.1);
    }

    let signal = trend_signal(series, config.signal_lookback)?;
    let deltas = make_target(&signal)?;
    let returns = daily_returns(series)?;
    let n = series.bars.len();

    let first_window_end = standardized.valid_from + config.window - 1;
    let mut samples = Vec::new();
    for t in first_window_end..n.saturating_sub(1) {
        let target = match config.target_mode {
            TargetMode::SignalDiff => deltas[t],
            TargetMode::Return => returns[t], // returns[t] is r at date t+1
        };
        if !target.is_finite() || !signal.normalized[t].is_finite() {
            continue;
        }
        let mut window = Array2::zeros((config.window, standardized.n_features()));
        for (i, row_t) in (t + 1 - config.window..=t).enumerate() {
            for (j, (_, col)) in standardized.columns.iter().enumerate() {
                window[[i, j]] = col[row_t];
            }
        }
        samples.push(Sample {
            window,
            target,
            date: series.bars[t].date,
            base_signal: signal.normalized[t],
            next_return: returns[t],
        });
    }
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 10, got: 0 });
    }
    let dates: Vec<NaiveDate> = samples.iter().map(|s| s.date).collect();
    let splits = chrono_split(&dates, config.fractions)?;
    Ok(SampleSet { ticker: series.ticker.clone(), samples, splits, scaling_state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::tests::series_from_closes;

    fn signal_from(values: &[f64]) -> SignalSeries {
        let start = NaiveDate::from_ymd_opt(2021, 6, 1).unwrap();
        SignalSeries {
            dates: (0..values.len())
                .map(|i| start + chrono::Duration::days(i as i64))
                .collect(),
            raw: values.to_vec(),
            normalized: values.to_vec(),
            lookback: 1,
        }
    }

    fn wavy_series(n: usize) -> crate::market_data::OhlcvSeries {
        let closes: Vec<f64> = (0..n)
            .map(|i| {
                100.0 + 18.0 * (i as f64 * 0.05).sin() + 6.0 * (i as f64 * 0.29).cos()
                    + i as f64 * 0.01
            })
            .collect();
        series_from_closes("SYN", &closes)
    }

    fn small_configs() -> (FeatureConfig, DatasetConfig) {
        (
            FeatureConfig {
                lookbacks: vec![20],
                winsor_quantiles: None,
                ..FeatureConfig::default()
            },
            DatasetConfig { window: 10, signal_lookback: 20, ..DatasetConfig::default() },
        )
    }

    #[test]
    fn target_is_first_difference() {
        let sig = signal_from(&[0.0, 0.5, 0.3]);
        let t = make_target(&sig).unwrap();
        assert!((t[0] - 0.5).abs() < 1e-15);
        assert!((t[1] + 0.2).abs() < 1e-15);
        assert!(t[2].is_nan());

        let flat = signal_from(&[1.0; 5]);
        let t = make_target(&flat).unwrap();
        assert!(t[..4].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn target_matches_stored_signal_diffs() {
        let series = wavy_series(220);
        let sig = trend_signal(&series, 30).unwrap();
        let t = make_target(&sig).unwrap();
        for i in 60..219 {
            let expect = sig.normalized[i + 1] - sig.normalized[i];
            assert!((t[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn standardize_constant_column_is_zero() {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let frame = FeatureFrame {
            ticker: "T".into(),
            dates: (0..20).map(|i| start + chrono::Duration::days(i)).collect(),
            columns: vec![("c".into(), vec![5.0; 20])],
            valid_from: 0,
        };
        let (out, state) = rolling_standardize(&frame, 5).unwrap();
        assert_eq!(out.valid_from, 4);
        for t in 4..20 {
            assert_eq!(out.columns[0].1[t], 0.0);
            assert_eq!(state.stds[0][t], 0.0);
        }
    }

    #[test]
    fn standardize_ramp_oracle() {
        // Linear ramp with T=3: (x_t - mean) / std = 1 / 1 = 1 everywhere.
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let frame = FeatureFrame {
            ticker: "T".into(),
            dates: (0..12).map(|i| start + chrono::Duration::days(i)).collect(),
            columns: vec![("ramp".into(), (0..12).map(|i| i as f64).collect())],
            valid_from: 0,
        };
        let (out, _) = rolling_standardize(&frame, 3).unwrap();
        for t in 2..12 {
            assert!((out.columns[0].1[t] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn standardize_output_finite_where_defined() {
        let series = wavy_series(200);
        let config = FeatureConfig {
            lookbacks: vec![20],
            winsor_quantiles: None,
            ..FeatureConfig::default()
        };
        let frame = build_feature_frame(&series, &config).unwrap();
        let (out, _) = rolling_standardize(&frame, 15).unwrap();
        for (_, col) in &out.columns {
            assert!(col[out.valid_from..].iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn clip_hand_cases() {
        let mut v = vec![7.2, -3.0, -9.0, f64::NAN];
        clip(&mut v, -5.0, 5.0);
        assert_eq!(v[0], 5.0);
        assert_eq!(v[1], -3.0);
        assert_eq!(v[2], -5.0);
        assert!(v[3].is_nan());
    }

    fn date_range(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect()
    }

    #[test]
    fn split_sizes() {
        let labels = chrono_split(&date_range(100), (0.70, 0.15, 0.15)).unwrap();
        let count = |l: SplitLabel| labels.iter().filter(|&&x| x == l).count();
        assert_eq!(count(SplitLabel::Train), 70);
        assert_eq!(count(SplitLabel::Validation), 15);
        assert_eq!(count(SplitLabel::Test), 15);

        let labels = chrono_split(&date_range(10), (0.70, 0.15, 0.15)).unwrap();
        let count = |l: SplitLabel| labels.iter().filter(|&&x| x == l).count();
        assert_eq!(
            (count(SplitLabel::Train), count(SplitLabel::Validation), count(SplitLabel::Test)),
            (7, 1, 2)
        );
    }

    #[test]
    fn split_rejects_unsorted_and_tiny() {
        let mut dates = date_range(20);
        dates.swap(5, 6);
        assert!(matches!(
            chrono_split(&dates, (0.7, 0.15, 0.15)),
            Err(Error::NotChronological)
        ));
        assert!(matches!(
            chrono_split(&date_range(9), (0.7, 0.15, 0.15)),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(chrono_split(&date_range(20), (0.7, 0.2, 0.2)).is_err());
    }

    #[test]
    fn split_is_ordered_partition() {
        let labels = chrono_split(&date_range(57), (0.70, 0.15, 0.15)).unwrap();
        assert_eq!(labels.len(), 57);
        let mut last_rank = 0u8;
        for l in &labels {
            let rank = match l {
                SplitLabel::Train => 0,
                SplitLabel::Validation => 1,
                SplitLabel::Test => 2,
            };
            assert!(rank >= last_rank, "labels out of chronological order");
            last_rank = rank;
        }
    }

    #[test]
    fn windows_counts_and_overlap() {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let n = 9;
        let frame = FeatureFrame {
            ticker: "T".into(),
            dates: (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect(),
            columns: vec![("a".into(), (0..n).map(|i| i as f64).collect())],
            valid_from: 0,
        };
        let t = 4;
        let ws = windows(&frame, t).unwrap();
        assert_eq!(ws.len(), n - t + 1); // n_valid = T + 5 -> 6 windows
        for k in 1..ws.len() {
            // consecutive windows share T-1 rows
            for i in 0..t - 1 {
                assert_eq!(ws[k][[i, 0]], ws[k - 1][[i + 1, 0]]);
            }
        }

        let exact = FeatureFrame {
            ticker: "T".into(),
            dates: (0..4).map(|i| start + chrono::Duration::days(i)).collect(),
            columns: vec![("a".into(), vec![1.0, 2.0, 3.0, 4.0])],
            valid_from: 0,
        };
        assert_eq!(windows(&exact, 4).unwrap().len(), 1);
    }

    #[test]
    fn windows_index_oracle() {
        let series = wavy_series(120);
        let config = FeatureConfig {
            lookbacks: vec![10],
            winsor_quantiles: None,
            ..FeatureConfig::default()
        };
        let frame = build_feature_frame(&series, &config).unwrap();
        let t = 7;
        let ws = windows(&frame, t).unwrap();
        for &(k, i, j) in &[(0usize, 0usize, 0usize), (3, 2, 1), (10, 6, 3), (20, 3, 5)] {
            let row = frame.valid_from + k + i;
            assert_eq!(ws[k][[i, j]], frame.columns[j].1[row]);
        }
    }

    #[test]
    fn samples_respect_clip_bounds() {
        let series = wavy_series(300);
        let (fc, dc) = small_configs();
        let set = build_samples(&series, &fc, &dc).unwrap();
        for s in &set.samples {
            for &v in s.window.iter() {
                assert!((-5.0..=5.0).contains(&v));
            }
        }
        assert_eq!(set.samples.len(), set.splits.len());
    }

    #[test]
    fn no_leakage_under_truncation() {
        // Bit-identical samples before the truncation point (winsorization
        // disabled; its full-sample quantiles are the documented exception).
        let series = wavy_series(320);
        let (fc, dc) = small_configs();
        let full = build_samples(&series, &fc, &dc).unwrap();

        let cut = 290;
        let mut shorter = series.clone();
        shorter.bars.truncate(cut);
        let pre = build_samples(&shorter, &fc, &dc).unwrap();

        let cut_date = series.bars[cut - 1].date;
        for (a, b) in full.samples.iter().zip(pre.samples.iter()) {
            if a.date >= cut_date {
                break;
            }
            assert_eq!(a.date, b.date);
            assert_eq!(a.target.to_bits(), b.target.to_bits());
            assert_eq!(a.base_signal.to_bits(), b.base_signal.to_bits());
            assert_eq!(a.next_return.to_bits(), b.next_return.to_bits());
            for (x, y) in a.window.iter().zip(b.window.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        assert!(pre.samples.len() > 50);
    }

    #[test]
    fn sample_targets_look_ahead_one_day() {
        let series = wavy_series(300);
        let (fc, dc) = small_configs();
        let set = build_samples(&series, &fc, &dc).unwrap();
        let sig = trend_signal(&series, dc.signal_lookback).unwrap();
        let by_date: std::collections::HashMap<NaiveDate, usize> = series
            .dates()
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d, i))
            .collect();
        for s in &set.samples {
            let t = by_date[&s.date];
            let expect = sig.normalized[t + 1] - sig.normalized[t];
            assert!((s.target - expect).abs() < 1e-15);
            assert!((s.base_signal - sig.normalized[t]).abs() < 1e-15);
        }
    }
}
