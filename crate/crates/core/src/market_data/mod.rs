//! OHLCV ingestion and cleaning.
//!
//! Input files are per-ticker CSVs with header
//! `date,open,high,low,close,adj_close,volume` and `YYYY-MM-DD` dates.
//! Cleaning applies, in order: winsorization of volume (returns are
//! winsorized downstream, in feature construction only), calendar alignment
//! across the universe with gap imputation, and stationarity checks on the
//! differenced trend series.
//!
//! Winsorization bounds are taken from the full per-ticker sample once at
//! ingestion; this is a deliberate one-shot preprocessing step and the
//! mild lookahead it introduces affects model features only, never signal
//! prices or P&L returns.

mod stationarity;

pub use stationarity::{adf_test, kpss_test, stationarity_result, AdfResult, KpssResult, StationarityResult};

use crate::error::{Error, Result};
use crate::util;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const CSV_COLUMNS: [&str; 7] = ["date", "open", "high", "low", "close", "adj_close", "volume"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

/// One applied fix, mirrored to the cleaning-log CSV
/// (`date,ticker,field,action,old,new`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CleaningFix {
    pub date: String,
    pub ticker: String,
    pub field: String,
    pub action: String,
    pub old: String,
    pub new: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OhlcvSeries {
    pub ticker: String,
    pub bars: Vec<OhlcvBar>,
    pub cleaning_log: Vec<CleaningFix>,
}

impl OhlcvSeries {
    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn adj_closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.adj_close).collect()
    }
}

/// Daily-return moments reported in percent, plus lag-1 autocorrelations.
/// `ac1`/`delta_ac1` are `None` when the underlying series has zero
/// variance. Kurtosis is reported as excess kurtosis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean_pct: f64,
    pub std_pct: f64,
    pub ac1: Option<f64>,
    pub skewness: f64,
    pub kurtosis_excess: f64,
    pub delta_ac1: Option<f64>,
}

/// Parse one per-ticker OHLCV CSV. Rows are re-sorted by date; duplicate
/// dates are an error. Rows with unparseable or out-of-domain numerics are
/// dropped and recorded in the cleaning log together with their 1-based
/// data row index.
pub fn load_ohlcv(path: &Path, ticker: &str) -> Result<OhlcvSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let display_path = path.display().to_string();

    let mut col_idx = [0usize; 7];
    for (i, name) in CSV_COLUMNS.iter().enumerate() {
        match headers.iter().position(|h| h.trim() == *name) {
            Some(pos) => col_idx[i] = pos,
            None => {
                return Err(Error::MissingColumn {
                    column: (*name).to_string(),
                    path: display_path,
                })
            }
        }
    }

    let mut bars = Vec::new();
    let mut log = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let raw = |i: usize| record.get(col_idx[i]).unwrap_or("").trim().to_string();
        let mut reject = |field: &str, value: &str| {
            log.push(CleaningFix {
                date: raw(0),
                ticker: ticker.to_string(),
                field: field.to_string(),
                action: format!("rejected_row_{}", row_idx + 1),
                old: value.to_string(),
                new: String::new(),
            });
        };

        let date = match NaiveDate::parse_from_str(&raw(0), "%Y-%m-%d") {
            Ok(d) => d,
            Err(_) => {
                reject("date", &raw(0));
                continue;
            }
        };
        let mut values = [0.0_f64; 6];
        let mut bad = false;
        for i in 1..7 {
            match raw(i).parse::<f64>() {
                Ok(v) if v.is_finite() => values[i - 1] = v,
                _ => {
                    reject(CSV_COLUMNS[i], &raw(i));
                    bad = true;
                    break;
                }
            }
        }
        if bad {
            continue;
        }
        let [open, high, low, close, adj_close, volume] = values;
        if open <= 0.0 || high <= 0.0 || low <= 0.0 || close <= 0.0 || adj_close <= 0.0 {
            reject("price", "nonpositive");
            continue;
        }
        if volume < 0.0 {
            reject("volume", "negative");
            continue;
        }
        bars.push(OhlcvBar { date, open, high, low, close, adj_close, volume });
    }

    if bars.is_empty() {
        return Err(Error::EmptyFile { path: display_path });
    }

    bars.sort_by_key(|b| b.date);
    for w in bars.windows(2) {
        if w[0].date == w[1].date {
            return Err(Error::NonMonotoneDates {
                ticker: ticker.to_string(),
                date: w[1].date.to_string(),
            });
        }
    }

    // Enforce the bar envelope: low <= min(open, close) <= max(open, close) <= high.
    for bar in &mut bars {
        let lo = bar.open.min(bar.close);
        let hi = bar.open.max(bar.close);
        if bar.low > lo {
            log.push(fix(bar.date, ticker, "low", "clamped_low", bar.low, lo));
            bar.low = lo;
        }
        if bar.high < hi {
            log.push(fix(bar.date, ticker, "high", "clamped_high", bar.high, hi));
            bar.high = hi;
        }
    }

    Ok(OhlcvSeries { ticker: ticker.to_string(), bars, cleaning_log: log })
}

fn fix(date: NaiveDate, ticker: &str, field: &str, action: &str, old: f64, new: f64) -> CleaningFix {
    CleaningFix {
        date: date.to_string(),
        ticker: ticker.to_string(),
        field: field.to_string(),
        action: action.to_string(),
        old: old.to_string(),
        new: new.to_string(),
    }
}

/// Daily returns from adjusted closes: r_t = P_t / P_{t-1} - 1.
pub fn daily_returns(series: &OhlcvSeries) -> Result<Vec<f64>> {
    let n = series.bars.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 2, got: n });
    }
    Ok(series
        .bars
        .windows(2)
        .map(|w| w[1].adj_close / w[0].adj_close - 1.0)
        .collect())
}

/// Clamp the tails of `values` to their lower/upper empirical quantile
/// bounds, preserving order. The bounds are order statistics: the lowest
/// floor(n*lower_q) values are raised and the highest floor(n*(1-upper_q))
/// values are lowered, which makes the operation exactly idempotent.
pub fn winsorize(values: &[f64], lower_q: f64, upper_q: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..1.0).contains(&lower_q) || !(lower_q..=1.0).contains(&upper_q) || lower_q >= upper_q {
        return Err(Error::InvalidConfig(format!(
            "winsorize quantiles must satisfy 0 <= lo < hi <= 1, got ({lower_q}, {upper_q})"
        )));
    }
    let n = values.len();
    let sorted = util::sorted_copy(values);
    let k_lo = (n as f64 * lower_q).floor() as usize;
    let k_hi = (n as f64 * (1.0 - upper_q)).floor() as usize;
    let lo_bound = sorted[k_lo.min(n - 1)];
    let hi_bound = sorted[n - 1 - k_hi.min(n - 1)];
    Ok(values.iter().map(|&v| v.clamp(lo_bound, hi_bound)).collect())
}

/// Winsorize the volume column in place, logging each clamp.
pub fn winsorize_volume(series: &mut OhlcvSeries, lower_q: f64, upper_q: f64) -> Result<()> {
    let volumes: Vec<f64> = series.bars.iter().map(|b| b.volume).collect();
    let clamped = winsorize(&volumes, lower_q, upper_q)?;
    let ticker = series.ticker.clone();
    for (bar, new_v) in series.bars.iter_mut().zip(clamped) {
        if bar.volume != new_v {
            series
                .cleaning_log
                .push(fix(bar.date, &ticker, "volume", "winsorized", bar.volume, new_v));
            bar.volume = new_v;
        }
    }
    Ok(())
}

/// Align all series onto a common calendar. Single-day gaps are linearly
/// interpolated, 2-3 day gaps forward-filled, and any date inside a longer
/// gap (or outside a ticker's own first/last observation) is dropped from
/// the calendar for every ticker.
pub fn align_and_fill(universe: &[OhlcvSeries]) -> Result<Vec<OhlcvSeries>> {
    if universe.is_empty() {
        return Err(Error::EmptyInput);
    }

    let union: BTreeSet<NaiveDate> =
        universe.iter().flat_map(|s| s.bars.iter().map(|b| b.date)).collect();
    let union: Vec<NaiveDate> = union.into_iter().collect();

    // Per-ticker missing runs relative to the union calendar decide which
    // dates survive. Edge runs can never be imputed.
    let mut dropped: BTreeSet<NaiveDate> = BTreeSet::new();
    let mut drop_log: Vec<CleaningFix> = Vec::new();
    for series in universe {
        let have: BTreeSet<NaiveDate> = series.bars.iter().map(|b| b.date).collect();
        let first = *have.iter().next().unwrap();
        let last = *have.iter().next_back().unwrap();
        let mut run: Vec<NaiveDate> = Vec::new();
        for &d in union.iter().chain(std::iter::once(&NaiveDate::MAX)) {
            if d != NaiveDate::MAX && !have.contains(&d) {
                run.push(d);
                continue;
            }
            if !run.is_empty() {
                let edge = run[0] < first || *run.last().unwrap() > last;
                if edge || run.len() > 3 {
                    for &gap_date in &run {
                        if dropped.insert(gap_date) {
                            drop_log.push(CleaningFix {
                                date: gap_date.to_string(),
                                ticker: series.ticker.clone(),
                                field: "calendar".to_string(),
                                action: "dropped_gap".to_string(),
                                old: String::new(),
                                new: String::new(),
                            });
                        }
                    }
                }
                run.clear();
            }
        }
    }

    let calendar: Vec<NaiveDate> = union.iter().copied().filter(|d| !dropped.contains(d)).collect();
    if calendar.is_empty() {
        return Err(Error::EmptyIntersection);
    }

    let mut out = Vec::with_capacity(universe.len());
    for series in universe {
        let mut log = series.cleaning_log.clone();
        for fix in &drop_log {
            if fix.ticker == series.ticker {
                log.push(fix.clone());
            }
        }
        let mut bars: Vec<OhlcvBar> = Vec::with_capacity(calendar.len());
        let by_date: std::collections::BTreeMap<NaiveDate, &OhlcvBar> =
            series.bars.iter().map(|b| (b.date, b)).collect();

        let mut i = 0usize;
        while i < calendar.len() {
            let d = calendar[i];
            if let Some(bar) = by_date.get(&d) {
                bars.push((*bar).clone());
                i += 1;
                continue;
            }
            // Start of a gap: scan to its end within the calendar.
            let start = i;
            while i < calendar.len() && !by_date.contains_key(&calendar[i]) {
                i += 1;
            }
            let gap_len = i - start;
            let prev = bars.last().cloned();
            let next = if i < calendar.len() { by_date.get(&calendar[i]).map(|b| (*b).clone()) } else { None };
            let (prev, action): (OhlcvBar, &str) = match (prev, &next, gap_len) {
                (Some(p), Some(_), 1) => (p, "interpolated"),
                (Some(p), _, 2..=3) => (p, "forward_filled"),
                _ => {
                    // Cannot happen for calendars produced above; guard anyway.
                    return Err(Error::EmptyIntersection);
                }
            };
            for (k, &gap_date) in calendar[start..i].iter().enumerate() {
                let bar = if action == "interpolated" {
                    let nx = next.as_ref().unwrap();
                    let w = (k + 1) as f64 / (gap_len + 1) as f64;
                    let lerp = |a: f64, b: f64| a + w * (b - a);
                    OhlcvBar {
                        date: gap_date,
                        open: lerp(prev.open, nx.open),
                        high: lerp(prev.high, nx.high),
                        low: lerp(prev.low, nx.low),
                        close: lerp(prev.close, nx.close),
                        adj_close: lerp(prev.adj_close, nx.adj_close),
                        volume: lerp(prev.volume, nx.volume),
                    }
                } else {
                    OhlcvBar { date: gap_date, ..prev.clone() }
                };
                log.push(CleaningFix {
                    date: gap_date.to_string(),
                    ticker: series.ticker.clone(),
                    field: "bar".to_string(),
                    action: action.to_string(),
                    old: String::new(),
                    new: bar.adj_close.to_string(),
                });
                bars.push(bar);
            }
        }
        // Bars on dates dropped for other tickers' sake fall out here.
        bars.retain(|b| !dropped.contains(&b.date));
        out.push(OhlcvSeries { ticker: series.ticker.clone(), bars, cleaning_log: log });
    }
    Ok(out)
}

/// Moments of daily returns in percent plus lag-1 autocorrelations of
/// returns and of the supplied trend-difference series.
pub fn summary_stats(series: &OhlcvSeries, delta: &[f64]) -> Result<SummaryStats> {
    let returns = daily_returns(series)?;
    if returns.len() < 30 {
        return Err(Error::TooShort { needed: 30, got: returns.len() });
    }
    let pct: Vec<f64> = returns.iter().map(|r| r * 100.0).collect();
    let m = util::mean(&pct);
    let n = pct.len() as f64;
    let m2 = pct.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = pct.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    let m4 = pct.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
    let (skewness, kurtosis_excess) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(SummaryStats {
        mean_pct: m,
        std_pct: util::std_dev(&pct),
        ac1: util::autocorr1(&returns),
        skewness,
        kurtosis_excess,
        delta_ac1: util::autocorr1(delta),
    })
}
