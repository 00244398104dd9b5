//! `compare`: the full per-ticker model comparison. Emits per-model
//! metrics, model-comparison and baseline-vs-LSTM tables with TOTAL rows,
//! cross-sectional aggregates, per-ticker plot data, and the run manifest.

use crate::commands::{fmt_opt, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::backtest::{cross_section, run_ticker, ComparisonRow, ModelKind, TickerRun};
use deltrend::market_data::load_ohlcv;
use deltrend::util::derive_seed;

pub fn run(config: &RunConfig) -> CmdResult {
    let files = store::select_tickers(config)?;
    let out = &config.output_dir;
    store::ensure_dir(out)?;
    let plots = out.join("plots");
    store::ensure_dir(&plots)?;
    let models_dir = out.join("models");
    store::ensure_dir(&models_dir)?;

    let jobs: Vec<(String, std::path::PathBuf)> = files.clone();
    let results: Vec<(String, Result<TickerRun, String>)> =
        parallel_map(config.workers, &jobs, |(ticker, path)| {
            let run = || -> Result<TickerRun, String> {
                let series = load_ohlcv(path, ticker).map_err(|e| e.to_string())?;
                let mut experiment = config.experiment.clone();
                experiment.seed = derive_seed(config.seed, &format!("compare/{ticker}"));
                experiment.train.seed = experiment.seed;
                run_ticker(&series, &config.models, &experiment).map_err(|e| e.to_string())
            };
            (ticker.clone(), run())
        });

    // per-model metrics, with failures marked in the error column
    let mut metrics = csv::Writer::from_path(out.join("metrics.csv"))?;
    metrics.write_record([
        "ticker",
        "model",
        "rmse",
        "directional_accuracy",
        "sharpe_annualized",
        "cum_pnl",
        "pnl_gain",
        "lambda",
        "val_loss",
        "error",
    ])?;
    let mut rows: Vec<ComparisonRow> = Vec::new();
    let mut succeeded = 0usize;
    for (ticker, result) in &results {
        match result {
            Ok(run) => {
                succeeded += 1;
                metrics.write_record(&[
                    ticker.clone(),
                    "baseline".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    run.baseline.final_cum_pnl().to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
                for (kind, outcome) in &run.models {
                    match outcome {
                        Ok(o) => metrics.write_record(&[
                            ticker.clone(),
                            kind.name().into(),
                            o.metrics.rmse.to_string(),
                            o.metrics.directional_accuracy.to_string(),
                            fmt_opt(o.metrics.sharpe_annualized),
                            o.metrics.cum_pnl.to_string(),
                            o.metrics.pnl_gain.to_string(),
                            fmt_opt(o.lambda),
                            fmt_opt(o.val_loss),
                            String::new(),
                        ])?,
                        Err(e) => metrics.write_record(&[
                            ticker.clone(),
                            kind.name().into(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            String::new(),
                            e.clone(),
                        ])?,
                    }
                }
                rows.push(ComparisonRow::from_run(run));
                write_plot_data(&plots, run)?;
                for (kind, outcome) in &run.models {
                    if let Ok(o) = outcome {
                        if let Some(artifact) = &o.artifact {
                            let path = models_dir.join(format!("{ticker}_{}.json", kind.name()));
                            std::fs::write(&path, serde_json::to_string_pretty(artifact)?)?;
                        }
                    }
                }
            }
            Err(e) => {
                metrics.write_record(&[
                    ticker.clone(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    e.clone(),
                ])?;
            }
        }
    }
    metrics.flush()?;
    if succeeded == 0 {
        return Err(CmdError::Runtime("every ticker failed; see metrics.csv".into()));
    }

    write_model_comparison(out, config, &rows)?;
    write_baseline_vs_lstm(out, config, &rows)?;

    let cs = cross_section(&rows)?;
    let mut csw = csv::Writer::from_path(out.join("cross_section.csv"))?;
    csw.write_record([
        "model",
        "total_cum_pnl",
        "total_gain",
        "gain_p25",
        "gain_median",
        "gain_p75",
        "win_count",
        "win_rate",
    ])?;
    csw.write_record(&[
        "baseline".to_string(),
        cs.baseline_total.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    for (kind, agg) in &cs.models {
        csw.write_record(&[
            kind.name().to_string(),
            agg.total_cum_pnl.to_string(),
            agg.total_gain.to_string(),
            agg.gain_p25.to_string(),
            agg.gain_median.to_string(),
            agg.gain_p75.to_string(),
            agg.win_count.to_string(),
            agg.win_rate.to_string(),
        ])?;
    }
    csw.flush()?;

    store::write_manifest(out, "compare", config, &files)?;
    println!("compared {succeeded}/{} tickers; reports in {}", results.len(), out.display());
    Ok(())
}

/// Forecast-vs-actual and cumulative-P&L curves as `date,value` files.
fn write_plot_data(plots: &std::path::Path, run: &TickerRun) -> Result<(), CmdError> {
    let lstm = run.models.iter().find(|(k, _)| *k == ModelKind::Lstm);
    if let Some((_, Ok(outcome))) = lstm {
        let r = &outcome.report;
        store::write_plot_csv(&plots.join(format!("{}_fig1_pred.csv", run.ticker)), &r.dates, &r.predictions)?;
        store::write_plot_csv(&plots.join(format!("{}_fig1_actual.csv", run.ticker)), &r.dates, &r.targets)?;
        store::write_plot_csv(&plots.join(format!("{}_fig2_lstm.csv", run.ticker)), &r.dates, &r.cum_pnl)?;
    }
    let b = &run.baseline;
    store::write_plot_csv(&plots.join(format!("{}_fig2_baseline.csv", run.ticker)), &b.dates, &b.cum_pnl)?;
    Ok(())
}

fn config_header(config: &RunConfig) -> String {
    format!(
        "# position_mode={:?} cost_bps={} target={:?} seed={}",
        config.experiment.position_mode,
        config.experiment.cost_bps,
        config.experiment.dataset.target_mode,
        config.seed
    )
}

/// Model-comparison table: per-model P&L gain per ticker plus TOTAL.
fn write_model_comparison(
    out: &std::path::Path,
    config: &RunConfig,
    rows: &[ComparisonRow],
) -> Result<(), CmdError> {
    use std::io::Write;
    let mut f = std::fs::File::create(out.join("model_comparison.csv"))?;
    writeln!(f, "{}", config_header(config))?;
    let models = &config.models;
    let header: Vec<String> = std::iter::once("ticker".to_string())
        .chain(models.iter().map(|m| m.name().to_string()))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    let mut totals = vec![0.0_f64; models.len()];
    for row in rows {
        let mut cells = vec![row.ticker.clone()];
        for (i, kind) in models.iter().enumerate() {
            match row.pnl_gain.get(kind) {
                Some(g) => {
                    totals[i] += g;
                    cells.push(g.to_string());
                }
                None => cells.push(String::new()),
            }
        }
        writeln!(f, "{}", cells.join(","))?;
    }
    let total_cells: Vec<String> = std::iter::once("TOTAL".to_string())
        .chain(totals.iter().map(|t| t.to_string()))
        .collect();
    writeln!(f, "{}", total_cells.join(","))?;
    Ok(())
}

/// Baseline-vs-LSTM cumulative P&L table with a positive-gain flag.
fn write_baseline_vs_lstm(
    out: &std::path::Path,
    config: &RunConfig,
    rows: &[ComparisonRow],
) -> Result<(), CmdError> {
    use std::io::Write;
    let mut f = std::fs::File::create(out.join("baseline_vs_lstm.csv"))?;
    writeln!(f, "{}", config_header(config))?;
    writeln!(f, "ticker,baseline_pnl,lstm_pnl,positive_gain")?;
    let mut base_total = 0.0;
    let mut lstm_total = 0.0;
    let mut wins = 0usize;
    for row in rows {
        base_total += row.baseline_cum_pnl;
        let lstm = row.model_cum_pnl.get(&ModelKind::Lstm);
        let gain_flag = match lstm {
            Some(v) => {
                lstm_total += v;
                if v - row.baseline_cum_pnl > 0.0 {
                    wins += 1;
                    "true"
                } else {
                    "false"
                }
            }
            None => "",
        };
        writeln!(
            f,
            "{},{},{},{}",
            row.ticker,
            row.baseline_cum_pnl,
            lstm.map(|v| v.to_string()).unwrap_or_default(),
            gain_flag
        )?;
    }
    writeln!(f, "Total,{base_total},{lstm_total},{wins}")?;
    Ok(())
}
