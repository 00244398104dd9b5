//! File-store helpers: ticker discovery, series loading, CSV emission,
//! checksums, and the run manifest.

use crate::config::RunConfig;
use crate::CmdError;
use deltrend::market_data::{load_ohlcv, OhlcvSeries};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Tickers in a data directory: every `*.csv`, stem uppercased, sorted.
pub fn discover_tickers(dir: &Path) -> Result<Vec<(String, PathBuf)>, CmdError> {
    let mut out = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CmdError::Usage(format!("cannot read data dir {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_uppercase(), path));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Resolve the configured ticker list against the data directory.
pub fn select_tickers(config: &RunConfig) -> Result<Vec<(String, PathBuf)>, CmdError> {
    let all = discover_tickers(&config.data_dir)?;
    if all.is_empty() {
        return Err(CmdError::Usage(format!(
            "no input files: {} contains no CSVs",
            config.data_dir.display()
        )));
    }
    if config.tickers.is_empty() {
        return Ok(all);
    }
    let mut out = Vec::new();
    for t in &config.tickers {
        let upper = t.to_uppercase();
        match all.iter().find(|(name, _)| *name == upper) {
            Some(found) => out.push(found.clone()),
            None => {
                return Err(CmdError::Usage(format!(
                    "ticker {upper} not found in {}",
                    config.data_dir.display()
                )))
            }
        }
    }
    Ok(out)
}

/// Load each ticker file, skipping unreadable ones with a warning on
/// stderr; returns the loaded series and (ticker, error) pairs.
pub fn load_universe(
    files: &[(String, PathBuf)],
) -> (Vec<OhlcvSeries>, Vec<(String, String)>) {
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for (ticker, path) in files {
        match load_ohlcv(path, ticker) {
            Ok(s) => series.push(s),
            Err(e) => {
                eprintln!("warning: skipping {ticker}: {e}");
                failures.push((ticker.clone(), e.to_string()));
            }
        }
    }
    (series, failures)
}

pub fn write_series_csv(path: &Path, series: &OhlcvSeries) -> Result<(), CmdError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(deltrend::market_data::CSV_COLUMNS)?;
    for bar in &series.bars {
        w.write_record(&[
            bar.date.to_string(),
            bar.open.to_string(),
            bar.high.to_string(),
            bar.low.to_string(),
            bar.close.to_string(),
            bar.adj_close.to_string(),
            bar.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CmdError> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Run manifest: command, full config, and input checksums. No
/// timestamps, so reruns are byte-identical.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &RunConfig,
    files: &[(String, PathBuf)],
) -> Result<(), CmdError> {
    let mut checksums = BTreeMap::new();
    for (ticker, path) in files {
        checksums.insert(ticker.clone(), sha256_file(path)?);
    }
    let manifest = serde_json::json!({
        "command": command,
        "seed": config.seed,
        "workers": config.workers,
        "config": config,
        "data_checksums": checksums,
    });
    let mut f = std::fs::File::create(out_dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<(), CmdError> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

/// Write `date,value` plot-data rows.
pub fn write_plot_csv(
    path: &Path,
    dates: &[chrono::NaiveDate],
    values: &[f64],
) -> Result<(), CmdError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["date", "value"])?;
    for (d, v) in dates.iter().zip(values) {
        w.write_record(&[d.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
