//! Robustness sweeps: re-run the per-ticker experiment varying exactly one
//! axis and tabulate metric deltas against the base configuration.

use super::{run_ticker, ExperimentConfig, Metrics, ModelKind, TickerRun};
use crate::error::Result;
use crate::market_data::OhlcvSeries;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lookback,
    Rsi,
    Macd,
    EarlyStopping,
}

impl std::str::FromStr for SweepAxis {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lookback" => Ok(SweepAxis::Lookback),
            "rsi" => Ok(SweepAxis::Rsi),
            "macd" => Ok(SweepAxis::Macd),
            "early_stopping" => Ok(SweepAxis::EarlyStopping),
            other => Err(crate::Error::InvalidConfig(format!("unknown sweep axis `{other}`"))),
        }
    }
}

pub const LOOKBACK_SWEEP: [usize; 5] = [25, 50, 100, 200, 300];
pub const RSI_SWEEP: [usize; 3] = [7, 14, 21];
pub const MACD_SWEEP: [(usize, usize); 3] = [(8, 17), (12, 26), (16, 33)];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub is_base: bool,
    pub metrics: BTreeMap<ModelKind, Metrics>,
    /// metric - base metric, per model present in both runs.
    pub delta_rmse: BTreeMap<ModelKind, f64>,
    pub delta_gain: BTreeMap<ModelKind, f64>,
    /// Best validation loss per trained model (lstm only).
    pub val_loss: BTreeMap<ModelKind, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn metrics_of(run: &TickerRun) -> (BTreeMap<ModelKind, Metrics>, BTreeMap<ModelKind, f64>) {
    let mut metrics = BTreeMap::new();
    let mut val_loss = BTreeMap::new();
    for (kind, outcome) in &run.models {
        if let Ok(o) = outcome {
            metrics.insert(*kind, o.metrics.clone());
            if let Some(v) = o.val_loss {
                val_loss.insert(*kind, v);
            }
        }
    }
    (metrics, val_loss)
}

/// Variants along one axis, each as (label, config, is_base).
fn variants(
    axis: SweepAxis,
    base: &ExperimentConfig,
) -> Vec<(String, ExperimentConfig, bool)> {
    match axis {
        SweepAxis::Lookback => LOOKBACK_SWEEP
            .iter()
            .map(|&l| {
                let mut c = base.clone();
                c.feature.lookbacks = vec![l];
                let is_base = base.feature.lookbacks == vec![l];
                (format!("lookback_{l}"), c, is_base)
            })
            .collect(),
        SweepAxis::Rsi => RSI_SWEEP
            .iter()
            .map(|&w| {
                let mut c = base.clone();
                c.feature.rsi_window = w;
                (format!("rsi_{w}"), c, base.feature.rsi_window == w)
            })
            .collect(),
        SweepAxis::Macd => MACD_SWEEP
            .iter()
            .map(|&(fast, slow)| {
                let mut c = base.clone();
                c.feature.macd_spans = (fast, slow, base.feature.macd_spans.2);
                let is_base = base.feature.macd_spans.0 == fast && base.feature.macd_spans.1 == slow;
                (format!("macd_{fast}_{slow}"), c, is_base)
            })
            .collect(),
        SweepAxis::EarlyStopping => [true, false]
            .iter()
            .map(|&on| {
                let mut c = base.clone();
                c.train.early_stopping = on;
                let label = if on { "early_stopping_on" } else { "early_stopping_off" };
                (label.to_string(), c, base.train.early_stopping == on)
            })
            .collect(),
    }
}

/// Run the sweep. The base run is executed once with the base config;
/// every row's deltas are relative to it.
pub fn robustness_sweep(
    axis: SweepAxis,
    series: &OhlcvSeries,
    models: &[ModelKind],
    base: &ExperimentConfig,
) -> Result<SweepReport> {
    let base_run = run_ticker(series, models, base)?;
    let (base_metrics, _) = metrics_of(&base_run);

    let mut rows = Vec::new();
    for (label, config, is_base) in variants(axis, base) {
        let run = if is_base { base_run.clone() } else { run_ticker(series, models, &config)? };
        let (metrics, val_loss) = metrics_of(&run);
        let mut delta_rmse = BTreeMap::new();
        let mut delta_gain = BTreeMap::new();
        for (kind, m) in &metrics {
            if let Some(b) = base_metrics.get(kind) {
                delta_rmse.insert(*kind, m.rmse - b.rmse);
                delta_gain.insert(*kind, m.pnl_gain - b.pnl_gain);
            }
        }
        rows.push(SweepRow { label, is_base, metrics, delta_rmse, delta_gain, val_loss });
    }
    Ok(SweepReport { axis, rows })
}
