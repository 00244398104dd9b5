//! Hyperparameter grid search on the validation split.

use super::ExperimentConfig;
use crate::dataset::build_samples;
use crate::error::Result;
use crate::lstm::{train, TrainConfig};
use crate::market_data::OhlcvSeries;
use crate::util;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub epochs: Vec<usize>,
    pub batch: Vec<usize>,
    pub lookback: Vec<usize>,
    pub units: Vec<usize>,
    pub dropout: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            epochs: vec![50, 100, 150],
            batch: vec![32, 64, 128],
            lookback: vec![50, 100, 150],
            units: vec![32, 64, 128],
            dropout: vec![0.1, 0.2, 0.3],
            gamma: vec![1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub epochs: usize,
    pub batch: usize,
    pub lookback: usize,
    pub units: usize,
    pub dropout: f64,
    pub gamma: f64,
}

impl GridPoint {
    /// Stable identity string; also the key for per-job seed derivation,
    /// so results do not depend on evaluation order.
    pub fn key(&self) -> String {
        format!(
            "e{}_b{}_t{}_u{}_d{}_g{}",
            self.epochs, self.batch, self.lookback, self.units, self.dropout, self.gamma
        )
    }
}

impl GridSpec {
    /// Full Cartesian product in canonical declaration order.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &epochs in &self.epochs {
            for &batch in &self.batch {
                for &lookback in &self.lookback {
                    for &units in &self.units {
                        for &dropout in &self.dropout {
                            for &gamma in &self.gamma {
                                out.push(GridPoint {
                                    epochs,
                                    batch,
                                    lookback,
                                    units,
                                    dropout,
                                    gamma,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn contains(&self, p: &GridPoint) -> bool {
        self.epochs.contains(&p.epochs)
            && self.batch.contains(&p.batch)
            && self.lookback.contains(&p.lookback)
            && self.units.contains(&p.units)
            && self.dropout.contains(&p.dropout)
            && self.gamma.contains(&p.gamma)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: GridPoint,
    pub best_val_loss: f64,
    /// (point, validation loss) sorted ascending by loss.
    pub leaderboard: Vec<(GridPoint, f64)>,
}

/// Selection core, generic over the evaluator so the logic is testable
/// without training. Evaluates the full product or a seeded uniform
/// subsample of `budget` points; order of evaluation cannot change the
/// result because candidates keep their canonical rank.
pub fn grid_search_with<F>(
    grid: &GridSpec,
    budget: Option<usize>,
    seed: u64,
    mut evaluate: F,
) -> Result<GridOutcome>
where
    F: FnMut(&GridPoint) -> Result<f64>,
{
    let all = grid.points();
    if all.is_empty() {
        return Err(crate::Error::EmptyInput);
    }
    let chosen: Vec<(usize, GridPoint)> = match budget {
        Some(b) if b < all.len() => {
            let mut ranks: Vec<usize> = (0..all.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ranks.shuffle(&mut rng);
            let mut picked: Vec<usize> = ranks.into_iter().take(b).collect();
            picked.sort_unstable();
            picked.into_iter().map(|r| (r, all[r])).collect()
        }
        _ => all.into_iter().enumerate().collect(),
    };

    let mut scored: Vec<(usize, GridPoint, f64)> = Vec::with_capacity(chosen.len());
    for (rank, point) in chosen {
        let loss = evaluate(&point)?;
        scored.push((rank, point, loss));
    }
    scored.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
    let best = scored[0].1;
    let best_val_loss = scored[0].2;
    Ok(GridOutcome {
        best,
        best_val_loss,
        leaderboard: scored.into_iter().map(|(_, p, l)| (p, l)).collect(),
    })
}

/// Grid search over LSTM hyperparameters for one ticker. Each point gets
/// its own RNG stream derived from (seed, point key), and samples are
/// rebuilt per lookback since T changes the windowing.
pub fn grid_search(
    series: &OhlcvSeries,
    base: &ExperimentConfig,
    grid: &GridSpec,
    budget: Option<usize>,
) -> Result<GridOutcome> {
    grid_search_with(grid, budget, base.seed, |point| {
        let mut dataset = base.dataset.clone();
        dataset.window = point.lookback;
        let set = build_samples(series, &base.feature, &dataset)?;
        let config = TrainConfig {
            max_epochs: point.epochs,
            batch_size: point.batch,
            hidden: point.units,
            dropout: point.dropout,
            gamma: point.gamma,
            seed: util::derive_seed(base.seed, &point.key()),
            ..base.train.clone()
        };
        let (_, report) = train(&set, &config)?;
        Ok(report.final_val_loss)
    })
}
