//! Command implementations shared by the binary and the test suite.

pub mod backtest;
pub mod compare;
pub mod features;
pub mod grid;
pub mod ingest;
pub mod report;
pub mod robustness;
pub mod stats;
pub mod theorem;
pub mod train;

use crate::config::RunConfig;
use crate::store;
use crate::CmdError;
use deltrend::market_data::OhlcvSeries;
use rayon::prelude::*;

/// Map a job over tickers with the configured worker count; output order
/// always matches input order, so merged reports are deterministic.
pub(crate) fn parallel_map<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if workers <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// Load the (cleaned) per-ticker store for downstream commands; fails only
/// when nothing loads.
pub(crate) fn load_store(config: &RunConfig) -> Result<Vec<OhlcvSeries>, CmdError> {
    let files = store::select_tickers(config)?;
    let (series, _failures) = store::load_universe(&files);
    if series.is_empty() {
        return Err(CmdError::Runtime("no loadable input files".into()));
    }
    Ok(series)
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
