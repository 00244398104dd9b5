//! `ingest`: load raw OHLCV CSVs, clean, align calendars, and write the
//! cleaned store plus the cleaning log and stationarity report.

use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::dataset::make_target;
use deltrend::market_data::{align_and_fill, stationarity_result, winsorize_volume};
use deltrend::strategy::trend_signal;

pub fn run(config: &RunConfig) -> CmdResult {
    let files = store::select_tickers(config)?;
    let (mut universe, failures) = store::load_universe(&files);
    if universe.is_empty() {
        return Err(CmdError::Runtime("no loadable input files".into()));
    }

    if let Some((lo, hi)) = config.experiment.feature.winsor_quantiles {
        for series in &mut universe {
            winsorize_volume(series, lo, hi)?;
        }
    }
    let cleaned = align_and_fill(&universe)?;

    let out = &config.output_dir;
    let cleaned_dir = out.join("cleaned");
    store::ensure_dir(&cleaned_dir)?;
    for series in &cleaned {
        store::write_series_csv(&cleaned_dir.join(format!("{}.csv", series.ticker)), series)?;
    }

    // cleaning log: per-ticker fixes plus one row per skipped file
    let mut log = csv::Writer::from_path(out.join("cleaning_log.csv"))?;
    log.write_record(["date", "ticker", "field", "action", "old", "new"])?;
    for series in &cleaned {
        for fix in &series.cleaning_log {
            log.write_record([&fix.date, &fix.ticker, &fix.field, &fix.action, &fix.old, &fix.new])?;
        }
    }
    for (ticker, error) in &failures {
        log.write_record(["", ticker, "file", "skipped_file", error, ""])?;
    }
    log.flush()?;

    // stationarity of the trend-difference series (and raw returns for
    // reference); tickers too short for the signal are skipped with a note
    let mut st = csv::Writer::from_path(out.join("stationarity.csv"))?;
    st.write_record([
        "ticker",
        "series",
        "n",
        "adf_stat",
        "adf_reject_5pct",
        "kpss_stat",
        "kpss_reject_5pct",
        "lags_used",
    ])?;
    for series in &cleaned {
        let lookback = config.experiment.dataset.signal_lookback;
        let delta: Vec<f64> = match trend_signal(series, lookback).and_then(|s| make_target(&s)) {
            Ok(t) => t.into_iter().filter(|v| v.is_finite()).collect(),
            Err(e) => {
                eprintln!("warning: {}: no trend-difference series ({e})", series.ticker);
                Vec::new()
            }
        };
        let returns = deltrend::market_data::daily_returns(series)?;
        for (name, values) in [("delta", &delta), ("returns", &returns)] {
            match stationarity_result(values) {
                Ok(r) => st.write_record(&[
                    series.ticker.clone(),
                    name.to_string(),
                    values.len().to_string(),
                    r.adf_stat.to_string(),
                    r.adf_reject_5pct.to_string(),
                    r.kpss_stat.to_string(),
                    r.kpss_reject_5pct.to_string(),
                    r.lags_used.to_string(),
                ])?,
                Err(e) => {
                    eprintln!("warning: {} {name}: {e}", series.ticker);
                }
            }
        }
    }
    st.flush()?;

    store::write_manifest(out, "ingest", config, &files)?;
    println!(
        "ingested {} tickers into {} ({} skipped)",
        cleaned.len(),
        cleaned_dir.display(),
        failures.len()
    );
    Ok(())
}
