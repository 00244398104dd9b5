//! `report`: cross-sectional aggregate of an existing `compare` output,
//! reading metrics.csv and emitting per-model quartile summaries.

use crate::config::RunConfig;
use crate::{CmdError, CmdResult};
use deltrend::util::{percentile, sorted_copy};
use std::collections::BTreeMap;

pub fn run(config: &RunConfig) -> CmdResult {
    let metrics_path = config.output_dir.join("metrics.csv");
    if !metrics_path.exists() {
        return Err(CmdError::Usage(format!(
            "{} not found; run `compare` first",
            metrics_path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&metrics_path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(model_col), Some(rmse_col), Some(acc_col), Some(sharpe_col), Some(gain_col)) = (
        col("model"),
        col("rmse"),
        col("directional_accuracy"),
        col("sharpe_annualized"),
        col("pnl_gain"),
    ) else {
        return Err(CmdError::Runtime("metrics.csv missing expected columns".into()));
    };

    // model -> metric -> values across tickers
    let mut values: BTreeMap<String, BTreeMap<&'static str, Vec<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let model = record.get(model_col).unwrap_or("").to_string();
        if model.is_empty() || model == "baseline" {
            continue;
        }
        for (name, idx) in [
            ("rmse", rmse_col),
            ("directional_accuracy", acc_col),
            ("sharpe_annualized", sharpe_col),
            ("pnl_gain", gain_col),
        ] {
            if let Some(v) = record.get(idx).and_then(|s| s.parse::<f64>().ok()) {
                values.entry(model.clone()).or_default().entry(name).or_default().push(v);
            }
        }
    }
    if values.is_empty() {
        return Err(CmdError::Runtime("metrics.csv holds no successful model rows".into()));
    }

    let mut w = csv::Writer::from_path(config.output_dir.join("report.csv"))?;
    w.write_record(["model", "metric", "p25", "median", "p75", "n"])?;
    for (model, metrics) in &values {
        for (metric, vals) in metrics {
            let sorted = sorted_copy(vals);
            w.write_record(&[
                model.clone(),
                metric.to_string(),
                percentile(&sorted, 0.25).to_string(),
                percentile(&sorted, 0.5).to_string(),
                percentile(&sorted, 0.75).to_string(),
                vals.len().to_string(),
            ])?;
        }
    }
    w.flush()?;
    println!("wrote {}", config.output_dir.join("report.csv").display());
    Ok(())
}
