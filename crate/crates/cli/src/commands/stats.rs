//! `stats`: summary-statistics table of daily returns and trend
//! differences (kurtosis reported as excess, flagged by the column name).

use crate::commands::load_store;
use crate::config::RunConfig;
use crate::store;
use crate::CmdResult;
use deltrend::dataset::make_target;
use deltrend::market_data::summary_stats;
use deltrend::strategy::trend_signal;

pub fn run(config: &RunConfig) -> CmdResult {
    let series = load_store(config)?;
    store::ensure_dir(&config.output_dir)?;
    let mut w = csv::Writer::from_path(config.output_dir.join("summary_stats.csv"))?;
    w.write_record([
        "ticker",
        "mean_pct",
        "std_pct",
        "ac1",
        "skewness",
        "kurtosis_excess",
        "delta_ac1",
    ])?;

    let mut written = 0usize;
    let mut sums = [0.0_f64; 6];
    for s in &series {
        let delta: Vec<f64> = trend_signal(s, config.experiment.dataset.signal_lookback)
            .and_then(|sig| make_target(&sig))
            .map(|t| t.into_iter().filter(|v| v.is_finite()).collect())
            .unwrap_or_default();
        match summary_stats(s, &delta) {
            Ok(st) => {
                let row = [
                    st.mean_pct,
                    st.std_pct,
                    st.ac1.unwrap_or(f64::NAN),
                    st.skewness,
                    st.kurtosis_excess,
                    st.delta_ac1.unwrap_or(f64::NAN),
                ];
                w.write_record(
                    std::iter::once(s.ticker.clone()).chain(row.iter().map(|v| v.to_string())),
                )?;
                for (acc, v) in sums.iter_mut().zip(row) {
                    *acc += v;
                }
                written += 1;
            }
            Err(e) => eprintln!("warning: {}: {e}", s.ticker),
        }
    }
    if written > 0 {
        w.write_record(
            std::iter::once("Mean".to_string())
                .chain(sums.iter().map(|v| (v / written as f64).to_string())),
        )?;
    }
    w.flush()?;
    println!("wrote summary stats for {written} tickers");
    Ok(())
}
