//! Per-ticker experiment orchestration: model-driven positions, test-split
//! metrics, grid search, cross-sectional aggregation, robustness sweeps,
//! and subperiod analysis.

mod grid;
mod sweep;

pub use grid::{grid_search, grid_search_with, GridOutcome, GridPoint, GridSpec};
pub use sweep::{robustness_sweep, SweepAxis, SweepReport, SweepRow};

use crate::dataset::{build_samples, DatasetConfig, SampleSet, SplitLabel};
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::gbt::{fit_gbt, predict_gbt, GbtParams};
use crate::linear_models::{
    fit_lasso, fit_ols, fit_ridge, predict as linear_predict, LinearFit, LASSO_DEFAULT_MAX_ITER,
    LASSO_DEFAULT_TOL,
};
use crate::lstm::{self, TrainConfig};
use crate::strategy::{pnl, PnlSeries, PositionSeries};
use crate::util;
use chrono::NaiveDate;
use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;
pub const LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Ols,
    Lasso,
    Ridge,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] =
        [ModelKind::Lstm, ModelKind::Ols, ModelKind::Lasso, ModelKind::Ridge, ModelKind::Gbt];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Ols => "ols",
            ModelKind::Lasso => "lasso",
            ModelKind::Ridge => "ridge",
            ModelKind::Gbt => "gbt",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lstm" => Ok(ModelKind::Lstm),
            "ols" => Ok(ModelKind::Ols),
            "lasso" => Ok(ModelKind::Lasso),
            "ridge" => Ok(ModelKind::Ridge),
            "gbt" => Ok(ModelKind::Gbt),
            other => Err(Error::InvalidConfig(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionMode {
    /// w_t = clamp(S~_t + forecast, -1, 1): trade the anticipated trend.
    AnticipatedTrend,
    /// w_t = tanh(gamma * forecast), the Sharpe-loss position map.
    TanhForecast,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub directional_accuracy: f64,
    /// None flags a degenerate-variance P&L stream rather than crashing.
    pub sharpe_annualized: Option<f64>,
    pub cum_pnl: f64,
    pub pnl_gain: f64,
}

/// Per-day record of one strategy run over the test window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub dates: Vec<NaiveDate>,
    pub weights: Vec<f64>,
    pub daily_pnl: Vec<f64>,
    pub cum_pnl: Vec<f64>,
    pub predictions: Vec<f64>,
    pub targets: Vec<f64>,
}

impl BacktestReport {
    pub fn final_cum_pnl(&self) -> f64 {
        self.cum_pnl.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub metrics: Metrics,
    pub report: BacktestReport,
    /// Penalty chosen on the validation split (ridge/lasso only).
    pub lambda: Option<f64>,
    /// Best validation loss from training (lstm only).
    pub val_loss: Option<f64>,
    /// Serialized fitted model: linear fits as
    /// {family, lambda, intercept, coefficients, feature_names}, boosted
    /// trees as the tree list. LSTM weights go through the checkpoint
    /// format instead.
    pub artifact: Option<serde_json::Value>,
}

/// One ticker's full experiment: the baseline plus per-model outcomes.
/// A failing model is recorded by message and does not abort the others.
#[derive(Debug, Clone)]
pub struct TickerRun {
    pub ticker: String,
    pub baseline: BacktestReport,
    pub models: Vec<(ModelKind, std::result::Result<ModelOutcome, String>)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub feature: FeatureConfig,
    pub dataset: DatasetConfig,
    pub train: TrainConfig,
    pub gbt: GbtParams,
    pub cost_bps: f64,
    pub position_mode: PositionMode,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature: FeatureConfig::default(),
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            gbt: GbtParams::default(),
            cost_bps: crate::strategy::DEFAULT_COST_BPS,
            position_mode: PositionMode::AnticipatedTrend,
            seed: 0,
        }
    }
}

fn std_with_guard(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v == values[0]) {
        return 0.0;
    }
    util::std_dev(values)
}

/// Forecast-accuracy and economic metrics for one model run. Zero
/// predictions only count as directionally correct against zero targets.
pub fn metrics(
    predictions: &[f64],
    targets: &[f64],
    model_pnl: &PnlSeries,
    baseline_pnl: &PnlSeries,
) -> Result<Metrics> {
    if predictions.len() != targets.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: targets.len() });
    }
    if predictions.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: predictions.len() });
    }
    let n = predictions.len() as f64;
    let rmse = (predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
        .sqrt();
    let hits = predictions
        .iter()
        .zip(targets)
        .filter(|(p, t)| {
            if **p == 0.0 {
                **t == 0.0
            } else {
                (**p > 0.0) == (**t > 0.0) && **t != 0.0
            }
        })
        .count();
    let directional_accuracy = hits as f64 / n;

    let daily = &model_pnl.daily;
    let sharpe_annualized = if daily.len() < 2 {
        None
    } else {
        let std = std_with_guard(daily);
        (std > 0.0).then(|| util::mean(daily) / std * TRADING_DAYS_PER_YEAR.sqrt())
    };

    let cum_pnl = model_pnl.final_cumulative();
    Ok(Metrics {
        rmse,
        directional_accuracy,
        sharpe_annualized,
        cum_pnl,
        pnl_gain: cum_pnl - baseline_pnl.final_cumulative(),
    })
}

/// Map forecasts to next-day positions over an aligned date range.
pub fn positions_from_forecast(
    dates: &[NaiveDate],
    base_signals: &[f64],
    forecasts: &[f64],
    mode: PositionMode,
    gamma: f64,
) -> Result<PositionSeries> {
    if base_signals.len() != forecasts.len() || dates.len() != forecasts.len() {
        return Err(Error::LengthMismatch { left: base_signals.len(), right: forecasts.len() });
    }
    let weights = base_signals
        .iter()
        .zip(forecasts)
        .map(|(&s, &d)| match mode {
            PositionMode::AnticipatedTrend => {
                if s.is_finite() {
                    (s + d).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            }
            PositionMode::TanhForecast => (gamma * d).tanh(),
        })
        .collect();
    Ok(PositionSeries { dates: dates.to_vec(), weights })
}

/// Test-split view of a sample set: dates, base signals, targets, and the
/// return stream aligned so that pnl's one-day lag earns next_return.
struct TestSlice {
    dates: Vec<NaiveDate>,
    base_signals: Vec<f64>,
    targets: Vec<f64>,
    returns: Vec<f64>,
}

fn test_slice(set: &SampleSet) -> Result<TestSlice> {
    let indices = set.indices_of(SplitLabel::Test);
    if indices.len() < 2 {
        return Err(Error::EmptySplit { split: "test".into() });
    }
    let dates: Vec<NaiveDate> = indices.iter().map(|&i| set.samples[i].date).collect();
    let base_signals: Vec<f64> = indices.iter().map(|&i| set.samples[i].base_signal).collect();
    let targets: Vec<f64> = indices.iter().map(|&i| set.samples[i].target).collect();
    // returns[k] is the return realized ON date k; the weight set at k-1
    // earns it. returns[0] is never earned (w_{-1} = 0).
    let mut returns = vec![0.0];
    for &idx in &indices[..indices.len() - 1] {
        returns.push(set.samples[idx].next_return);
    }
    Ok(TestSlice { dates, base_signals, targets, returns })
}

fn report_from(
    positions: &PositionSeries,
    pnl_series: &PnlSeries,
    predictions: Vec<f64>,
    targets: Vec<f64>,
) -> BacktestReport {
    BacktestReport {
        dates: positions.dates.clone(),
        weights: positions.weights.clone(),
        daily_pnl: pnl_series.daily.clone(),
        cum_pnl: pnl_series.cumulative.clone(),
        predictions,
        targets,
    }
}

fn stack_windows(set: &SampleSet, indices: &[usize]) -> Array3<f64> {
    let (t, m) = set.samples[indices[0]].window.dim();
    let mut batch = Array3::zeros((indices.len(), t, m));
    for (row, &i) in indices.iter().enumerate() {
        batch.index_axis_mut(ndarray::Axis(0), row).assign(&set.samples[i].window);
    }
    batch
}

/// Final feature vector x_t for the linear/GBT benchmarks: the last row
/// of each standardized window.
fn last_rows(set: &SampleSet, indices: &[usize]) -> Array2<f64> {
    let (t, m) = set.samples[indices[0]].window.dim();
    Array2::from_shape_fn((indices.len(), m), |(row, j)| {
        set.samples[indices[row]].window[[t - 1, j]]
    })
}

fn targets_of(set: &SampleSet, indices: &[usize]) -> Array1<f64> {
    Array1::from_iter(indices.iter().map(|&i| set.samples[i].target))
}

fn select_lambda<F>(fit_at: F, x_val: &Array2<f64>, y_val: &Array1<f64>) -> Result<(LinearFit, f64)>
where
    F: Fn(f64) -> Result<LinearFit>,
{
    let mut best: Option<(LinearFit, f64, f64)> = None;
    for &lambda in LAMBDA_GRID.iter() {
        let fit = fit_at(lambda)?;
        let preds = linear_predict(&fit, x_val)?;
        let rmse = (preds
            .iter()
            .zip(y_val.iter())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / y_val.len() as f64)
            .sqrt();
        let better = match &best {
            None => true,
            Some((_, _, best_rmse)) => rmse < *best_rmse,
        };
        if better {
            best = Some((fit, lambda, rmse));
        }
    }
    let (fit, lambda, _) = best.unwrap();
    Ok((fit, lambda))
}

struct Forecast {
    predictions: Vec<f64>,
    lambda: Option<f64>,
    val_loss: Option<f64>,
    artifact: Option<serde_json::Value>,
}

fn linear_artifact(fit: &LinearFit, feature_names: &[String]) -> serde_json::Value {
    serde_json::json!({
        "family": fit.family,
        "lambda": fit.lambda,
        "intercept": fit.intercept,
        "coefficients": fit.coefficients,
        "feature_names": feature_names,
    })
}

fn forecast_test_split(
    kind: ModelKind,
    set: &SampleSet,
    config: &ExperimentConfig,
) -> Result<Forecast> {
    let train_idx = set.indices_of(SplitLabel::Train);
    let val_idx = set.indices_of(SplitLabel::Validation);
    let test_idx = set.indices_of(SplitLabel::Test);
    if train_idx.is_empty() {
        return Err(Error::EmptySplit { split: "train".into() });
    }
    if val_idx.is_empty() {
        return Err(Error::EmptySplit { split: "validation".into() });
    }

    match kind {
        ModelKind::Lstm => {
            let (params, report) = lstm::train(set, &config.train)?;
            let preds = lstm::predict(&params, &stack_windows(set, &test_idx))?;
            Ok(Forecast {
                predictions: preds.to_vec(),
                lambda: None,
                val_loss: Some(report.final_val_loss),
                artifact: None,
            })
        }
        ModelKind::Ols | ModelKind::Ridge | ModelKind::Lasso => {
            let x_train = last_rows(set, &train_idx);
            let y_train = targets_of(set, &train_idx);
            let x_val = last_rows(set, &val_idx);
            let y_val = targets_of(set, &val_idx);
            let x_test = last_rows(set, &test_idx);
            let (fit, lambda) = match kind {
                ModelKind::Ols => (fit_ols(&x_train, &y_train)?, None),
                ModelKind::Ridge => {
                    let (fit, l) =
                        select_lambda(|l| fit_ridge(&x_train, &y_train, l), &x_val, &y_val)?;
                    (fit, Some(l))
                }
                ModelKind::Lasso => {
                    let (fit, l) = select_lambda(
                        |l| fit_lasso(&x_train, &y_train, l, LASSO_DEFAULT_TOL, LASSO_DEFAULT_MAX_ITER),
                        &x_val,
                        &y_val,
                    )?;
                    (fit, Some(l))
                }
                _ => unreachable!(),
            };
            Ok(Forecast {
                predictions: linear_predict(&fit, &x_test)?,
                lambda,
                val_loss: None,
                artifact: Some(linear_artifact(&fit, &set.scaling_state.feature_names)),
            })
        }
        ModelKind::Gbt => {
            let x_train = last_rows(set, &train_idx);
            let y_train = targets_of(set, &train_idx);
            let x_val = last_rows(set, &val_idx);
            let y_val = targets_of(set, &val_idx);
            let (model, _) = fit_gbt(
                &x_train,
                y_train.as_slice().unwrap(),
                &x_val,
                y_val.as_slice().unwrap(),
                &config.gbt,
            )?;
            Ok(Forecast {
                predictions: predict_gbt(&model, &last_rows(set, &test_idx))?,
                lambda: None,
                val_loss: None,
                artifact: serde_json::to_value(&model).ok(),
            })
        }
    }
}

/// Run the full experiment for one ticker: build samples once, train each
/// requested model family, and score everything on the identical test
/// window against the baseline strategy.
pub fn run_ticker(
    series: &crate::market_data::OhlcvSeries,
    models: &[ModelKind],
    config: &ExperimentConfig,
) -> Result<TickerRun> {
    let set = build_samples(series, &config.feature, &config.dataset)?;
    let slice = test_slice(&set)?;

    // Baseline over the same test dates, entering flat.
    let baseline_positions = PositionSeries {
        dates: slice.dates.clone(),
        weights: slice
            .base_signals
            .iter()
            .map(|&s| if s.is_finite() { s.clamp(-1.0, 1.0) } else { 0.0 })
            .collect(),
    };
    let baseline_pnl = pnl(&baseline_positions, &slice.returns, config.cost_bps)?;
    let baseline =
        report_from(&baseline_positions, &baseline_pnl, vec![0.0; slice.dates.len()], slice.targets.clone());

    let mut outcomes = Vec::new();
    for &kind in models {
        let run = || -> Result<ModelOutcome> {
            let forecast = forecast_test_split(kind, &set, config)?;
            let positions = positions_from_forecast(
                &slice.dates,
                &slice.base_signals,
                &forecast.predictions,
                config.position_mode,
                config.train.gamma,
            )?;
            let model_pnl = pnl(&positions, &slice.returns, config.cost_bps)?;
            let m = metrics(&forecast.predictions, &slice.targets, &model_pnl, &baseline_pnl)?;
            Ok(ModelOutcome {
                kind,
                metrics: m,
                report: report_from(&positions, &model_pnl, forecast.predictions, slice.targets.clone()),
                lambda: forecast.lambda,
                val_loss: forecast.val_loss,
                artifact: forecast.artifact,
            })
        };
        outcomes.push((kind, run().map_err(|e| e.to_string())));
    }
    Ok(TickerRun { ticker: series.ticker.clone(), baseline, models: outcomes })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub ticker: String,
    pub baseline_cum_pnl: f64,
    pub model_cum_pnl: BTreeMap<ModelKind, f64>,
    pub pnl_gain: BTreeMap<ModelKind, f64>,
}

impl ComparisonRow {
    pub fn from_run(run: &TickerRun) -> Self {
        let mut model_cum_pnl = BTreeMap::new();
        let mut pnl_gain = BTreeMap::new();
        for (kind, outcome) in &run.models {
            if let Ok(o) = outcome {
                model_cum_pnl.insert(*kind, o.metrics.cum_pnl);
                pnl_gain.insert(*kind, o.metrics.pnl_gain);
            }
        }
        Self {
            ticker: run.ticker.clone(),
            baseline_cum_pnl: run.baseline.final_cum_pnl(),
            model_cum_pnl,
            pnl_gain,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelAggregate {
    pub total_cum_pnl: f64,
    pub total_gain: f64,
    pub gain_p25: f64,
    pub gain_median: f64,
    pub gain_p75: f64,
    pub win_count: usize,
    pub win_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossSection {
    pub n_tickers: usize,
    pub baseline_total: f64,
    pub models: BTreeMap<ModelKind, ModelAggregate>,
}

/// Aggregate per-ticker rows: per-model totals, gain quartiles, and the
/// fraction of tickers with positive gain.
pub fn cross_section(rows: &[ComparisonRow]) -> Result<CrossSection> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let baseline_total = rows.iter().map(|r| r.baseline_cum_pnl).sum();
    let mut models = BTreeMap::new();
    for kind in ModelKind::ALL {
        let gains: Vec<f64> = rows.iter().filter_map(|r| r.pnl_gain.get(&kind).copied()).collect();
        if gains.is_empty() {
            continue;
        }
        let total_cum: f64 = rows.iter().filter_map(|r| r.model_cum_pnl.get(&kind)).sum();
        let sorted = util::sorted_copy(&gains);
        let win_count = gains.iter().filter(|&&g| g > 0.0).count();
        models.insert(
            kind,
            ModelAggregate {
                total_cum_pnl: total_cum,
                total_gain: gains.iter().sum(),
                gain_p25: util::percentile(&sorted, 0.25),
                gain_median: util::percentile(&sorted, 0.5),
                gain_p75: util::percentile(&sorted, 0.75),
                win_count,
                win_rate: win_count as f64 / gains.len() as f64,
            },
        );
    }
    Ok(CrossSection { n_tickers: rows.len(), baseline_total, models })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub metrics: Metrics,
}

/// Recompute metrics on contiguous date slices of a finished run. Weights
/// carry into each slice (daily P&L already embeds entry costs), so the
/// per-period cumulative P&L sums exactly to the whole over a partition.
pub fn subperiod_analysis(
    model: &BacktestReport,
    baseline: &BacktestReport,
    boundaries: &[(NaiveDate, NaiveDate)],
) -> Result<Vec<PeriodMetrics>> {
    let mut out = Vec::with_capacity(boundaries.len());
    for &(start, end) in boundaries {
        if start > end {
            return Err(Error::InvalidConfig(format!("period {start}..{end} is inverted")));
        }
        let idx: Vec<usize> = model
            .dates
            .iter()
            .enumerate()
            .filter_map(|(i, d)| (*d >= start && *d <= end).then_some(i))
            .collect();
        if idx.len() < 2 {
            return Err(Error::EmptySlice);
        }
        let preds: Vec<f64> = idx.iter().map(|&i| model.predictions[i]).collect();
        let targets: Vec<f64> = idx.iter().map(|&i| model.targets[i]).collect();
        let daily: Vec<f64> = idx.iter().map(|&i| model.daily_pnl[i]).collect();
        let base_daily: Vec<f64> = idx.iter().map(|&i| baseline.daily_pnl[i]).collect();
        let dates: Vec<NaiveDate> = idx.iter().map(|&i| model.dates[i]).collect();

        let cum: Vec<f64> = daily
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        let base_cum: Vec<f64> = base_daily
            .iter()
            .scan(0.0, |acc, d| {
                *acc += d;
                Some(*acc)
            })
            .collect();
        let model_pnl = PnlSeries { dates: dates.clone(), daily, cumulative: cum, cost_bps: 0.0 };
        let base_pnl =
            PnlSeries { dates: dates.clone(), daily: base_daily, cumulative: base_cum, cost_bps: 0.0 };
        let m = metrics(&preds, &targets, &model_pnl, &base_pnl)?;
        out.push(PeriodMetrics { start, end, metrics: m });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
