//! `grid`: hyperparameter search per ticker; emits the leaderboard and a
//! grid/selected-value table.

use crate::commands::{load_store, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::backtest::grid_search;

pub fn run(config: &RunConfig) -> CmdResult {
    let series = load_store(config)?;
    let dir = config.output_dir.join("grid");
    store::ensure_dir(&dir)?;

    let results = parallel_map(config.workers, &series, |s| {
        let mut experiment = config.experiment.clone();
        experiment.seed = config.seed;
        grid_search(s, &experiment, &config.grid, config.grid_budget)
            .map(|o| (s.ticker.clone(), o))
    });

    let mut written = 0usize;
    for result in results {
        let (ticker, outcome) = match result {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        let mut w = csv::Writer::from_path(dir.join(format!("{ticker}_leaderboard.csv")))?;
        w.write_record(["rank", "epochs", "batch", "lookback", "units", "dropout", "gamma", "val_loss"])?;
        for (rank, (p, loss)) in outcome.leaderboard.iter().enumerate() {
            w.write_record(&[
                (rank + 1).to_string(),
                p.epochs.to_string(),
                p.batch.to_string(),
                p.lookback.to_string(),
                p.units.to_string(),
                p.dropout.to_string(),
                p.gamma.to_string(),
                loss.to_string(),
            ])?;
        }
        w.flush()?;

        let joined = |v: &[String]| v.join(" ");
        let grid = &config.grid;
        let best = outcome.best;
        let mut t3 = csv::Writer::from_path(dir.join(format!("{ticker}_selected.csv")))?;
        t3.write_record(["hyperparameter", "grid_values", "selected_value"])?;
        let rows: [(&str, Vec<String>, String); 6] = [
            ("epochs", grid.epochs.iter().map(|v| v.to_string()).collect(), best.epochs.to_string()),
            ("batch_size", grid.batch.iter().map(|v| v.to_string()).collect(), best.batch.to_string()),
            ("lookback_window", grid.lookback.iter().map(|v| v.to_string()).collect(), best.lookback.to_string()),
            ("lstm_units", grid.units.iter().map(|v| v.to_string()).collect(), best.units.to_string()),
            ("dropout_rate", grid.dropout.iter().map(|v| v.to_string()).collect(), best.dropout.to_string()),
            ("sharpe_loss_gamma", grid.gamma.iter().map(|v| v.to_string()).collect(), best.gamma.to_string()),
        ];
        for (name, values, selected) in rows {
            t3.write_record(&[name.to_string(), joined(&values), selected])?;
        }
        t3.flush()?;
        println!("{ticker}: best {} (val loss {:.6})", outcome.best.key(), outcome.best_val_loss);
        written += 1;
    }
    if written == 0 {
        return Err(CmdError::Runtime("grid search failed for every ticker".into()));
    }
    Ok(())
}
