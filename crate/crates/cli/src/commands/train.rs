//! `train`: fit one LSTM per ticker, writing the checkpoint, the epoch
//! log, and the sample-set audit metadata.

use crate::commands::{load_store, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::dataset::build_samples;
use deltrend::lstm::{save_checkpoint, train};
use deltrend::util::derive_seed;

pub fn run(config: &RunConfig) -> CmdResult {
    let series = load_store(config)?;
    let dir = config.output_dir.join("train");
    store::ensure_dir(&dir)?;

    let results = parallel_map(config.workers, &series, |s| {
        let set = build_samples(s, &config.experiment.feature, &config.experiment.dataset)?;
        let mut train_config = config.experiment.train.clone();
        train_config.seed = derive_seed(config.seed, &format!("train/{}", s.ticker));
        let (params, report) = train(&set, &train_config)?;
        Ok::<_, deltrend::Error>((s.ticker.clone(), s.dates(), set, train_config, params, report))
    });

    let mut written = 0usize;
    for result in results {
        let (ticker, dates, set, train_config, params, report) = match result {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        save_checkpoint(&dir.join(format!("{ticker}.ckpt")), &params, &train_config, report.best_epoch)?;

        let mut w = csv::Writer::from_path(dir.join(format!("{ticker}_epochs.csv")))?;
        w.write_record(["epoch", "train_loss", "val_loss", "learning_rate"])?;
        for e in &report.epoch_log {
            w.write_record(&[
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
                e.learning_rate.to_string(),
            ])?;
        }
        w.flush()?;

        let mut meta = csv::Writer::from_path(dir.join(format!("{ticker}_samples.csv")))?;
        meta.write_record(["date", "split", "target"])?;
        for (sample, split) in set.samples.iter().zip(&set.splits) {
            meta.write_record(&[
                sample.date.to_string(),
                split.to_string(),
                sample.target.to_string(),
            ])?;
        }
        meta.flush()?;

        // per-date rolling scaling state so model inputs can be reproduced
        let scaling = &set.scaling_state;
        let mut sc = csv::Writer::from_path(dir.join(format!("{ticker}_scaling.csv")))?;
        let mut header = vec!["date".to_string()];
        for name in &scaling.feature_names {
            header.push(format!("mean_{name}"));
            header.push(format!("std_{name}"));
        }
        sc.write_record(&header)?;
        let n_dates = scaling.means.first().map(|v| v.len()).unwrap_or(0);
        for (t, date) in dates.iter().enumerate().take(n_dates) {
            if !scaling.means.iter().any(|col| col[t].is_finite()) {
                continue;
            }
            let mut row = vec![date.to_string()];
            for j in 0..scaling.feature_names.len() {
                let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
                row.push(cell(scaling.means[j][t]));
                row.push(cell(scaling.stds[j][t]));
            }
            sc.write_record(&row)?;
        }
        sc.flush()?;

        println!(
            "{ticker}: best epoch {} (val loss {:.6}), stopped_early={}",
            report.best_epoch, report.final_val_loss, report.stopped_early
        );
        written += 1;
    }
    if written == 0 {
        return Err(CmdError::Runtime("training failed for every ticker".into()));
    }
    Ok(())
}
