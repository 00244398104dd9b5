//! `backtest`: baseline trend-following P&L per ticker, exported as
//! `date,weight,daily_pnl,cum_pnl`.

use crate::commands::{load_store, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::market_data::daily_returns;
use deltrend::strategy::{pnl, positions_from_signal, trend_signal};

pub fn run(config: &RunConfig) -> CmdResult {
    let series = load_store(config)?;
    let dir = config.output_dir.join("backtest");
    store::ensure_dir(&dir)?;

    let lookback = config.experiment.dataset.signal_lookback;
    let cost = config.experiment.cost_bps;
    let results = parallel_map(config.workers, &series, |s| {
        let signal = trend_signal(s, lookback)?;
        let positions = positions_from_signal(&signal);
        let mut returns = vec![0.0];
        returns.extend(daily_returns(s)?);
        let series_pnl = pnl(&positions, &returns, cost)?;
        Ok::<_, deltrend::Error>((s.ticker.clone(), positions, series_pnl))
    });

    let mut written = 0usize;
    for result in results {
        let (ticker, positions, series_pnl) = match result {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        let mut w = csv::Writer::from_path(dir.join(format!("{ticker}_pnl.csv")))?;
        w.write_record(["date", "weight", "daily_pnl", "cum_pnl"])?;
        for i in 0..positions.dates.len() {
            w.write_record(&[
                positions.dates[i].to_string(),
                positions.weights[i].to_string(),
                series_pnl.daily[i].to_string(),
                series_pnl.cumulative[i].to_string(),
            ])?;
        }
        w.flush()?;
        written += 1;
    }
    if written == 0 {
        return Err(CmdError::Runtime("baseline backtest failed for every ticker".into()));
    }
    println!("wrote {written} baseline P&L series to {}", dir.display());
    Ok(())
}
