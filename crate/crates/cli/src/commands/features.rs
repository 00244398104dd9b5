//! `features`: persist per-ticker feature frames (first column `date`,
//! one column per feature; warm-up cells empty).

use crate::commands::{load_store, parallel_map};
use crate::config::RunConfig;
use crate::store;
use crate::{CmdError, CmdResult};
use deltrend::features::build_feature_frame;

pub fn run(config: &RunConfig) -> CmdResult {
    let series = load_store(config)?;
    let dir = config.output_dir.join("features");
    store::ensure_dir(&dir)?;

    let results = parallel_map(config.workers, &series, |s| {
        build_feature_frame(s, &config.experiment.feature).map(|f| (s.ticker.clone(), f))
    });
    let mut written = 0usize;
    for result in results {
        let (ticker, frame) = match result {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: {e}");
                continue;
            }
        };
        let mut w = csv::Writer::from_path(dir.join(format!("{ticker}_features.csv")))?;
        let mut header = vec!["date".to_string()];
        header.extend(frame.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for (t, date) in frame.dates.iter().enumerate() {
            let mut row = vec![date.to_string()];
            for (_, col) in &frame.columns {
                row.push(if col[t].is_finite() { col[t].to_string() } else { String::new() });
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        written += 1;
    }
    if written == 0 {
        return Err(CmdError::Runtime("no ticker produced a feature frame".into()));
    }
    println!("wrote {written} feature frames to {}", dir.display());
    Ok(())
}
