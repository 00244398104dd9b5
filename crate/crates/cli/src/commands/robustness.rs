//! `robustness`: one-axis sweeps (lookback, rsi, macd, early_stopping)
//! with per-row metric deltas against the base configuration.

use crate::commands::{load_store, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::backtest::{robustness_sweep, SweepAxis};
use deltrend::util::derive_seed;

pub fn run(config: &RunConfig, axis: SweepAxis) -> CmdResult {
    let series = load_store(config)?;
    let dir = config.output_dir.join("robustness");
    store::ensure_dir(&dir)?;

    let results = parallel_map(config.workers, &series, |s| {
        let mut experiment = config.experiment.clone();
        experiment.seed = derive_seed(config.seed, &format!("robustness/{}", s.ticker));
        experiment.train.seed = experiment.seed;
        robustness_sweep(axis, s, &config.models, &experiment).map(|r| (s.ticker.clone(), r))
    });

    let mut written = 0usize;
    for result in results {
        let (ticker, report) = match result {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        let axis_name = format!("{:?}", report.axis).to_lowercase();
        let mut w = csv::Writer::from_path(dir.join(format!("{ticker}_{axis_name}.csv")))?;
        w.write_record([
            "label",
            "is_base",
            "model",
            "rmse",
            "directional_accuracy",
            "sharpe_annualized",
            "cum_pnl",
            "pnl_gain",
            "delta_rmse",
            "delta_gain",
            "val_loss",
        ])?;
        for row in &report.rows {
            for (kind, m) in &row.metrics {
                w.write_record(&[
                    row.label.clone(),
                    row.is_base.to_string(),
                    kind.name().to_string(),
                    m.rmse.to_string(),
                    m.directional_accuracy.to_string(),
                    m.sharpe_annualized.map(|v| v.to_string()).unwrap_or_default(),
                    m.cum_pnl.to_string(),
                    m.pnl_gain.to_string(),
                    row.delta_rmse.get(kind).map(|v| v.to_string()).unwrap_or_default(),
                    row.delta_gain.get(kind).map(|v| v.to_string()).unwrap_or_default(),
                    row.val_loss.get(kind).map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        written += 1;
    }
    if written == 0 {
        return Err(CmdError::Runtime("sweep failed for every ticker".into()));
    }
    println!("wrote {written} sweep reports to {}", dir.display());
    Ok(())
}
