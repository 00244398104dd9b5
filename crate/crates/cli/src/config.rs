//! Run configuration: defaults, a flat `key = value` config file, and
//! CLI flag overrides.

use crate::CmdError;
use deltrend::backtest::{ExperimentConfig, GridSpec, ModelKind, PositionMode};
use deltrend::dataset::TargetMode;
use deltrend::lstm::LossKind;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Empty means every CSV found in data_dir.
    pub tickers: Vec<String>,
    pub models: Vec<ModelKind>,
    pub seed: u64,
    pub workers: usize,
    pub experiment: ExperimentConfig,
    pub grid: GridSpec,
    pub grid_budget: Option<usize>,
    pub theorem: TheoremConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremConfig {
    pub n: usize,
    pub rho: f64,
    pub sigma: f64,
    pub repetitions: usize,
    pub seeds_per_rep: usize,
    pub learner: deltrend::theorem_lab::Learner,
    pub amplitude: f64,
    pub period: f64,
    pub sweep_l: Vec<f64>,
    pub sweep_n: usize,
    pub sweep_seeds: usize,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self {
            n: 50_000,
            rho: 0.5,
            sigma: 1.0,
            repetitions: 20,
            seeds_per_rep: 50,
            learner: deltrend::theorem_lab::Learner::RidgeOnLags,
            amplitude: 5.0,
            period: 500.0,
            sweep_l: vec![0.001, 0.01, 0.1],
            sweep_n: 20_000,
            sweep_seeds: 30,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            tickers: Vec::new(),
            models: ModelKind::ALL.to_vec(),
            seed: 0,
            workers: 1,
            experiment: ExperimentConfig::default(),
            grid: GridSpec::default(),
            grid_budget: None,
            theorem: TheoremConfig::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CmdError {
    CmdError::Usage(msg.into())
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CmdError> {
    value
        .parse::<T>()
        .map_err(|_| usage(format!("config key `{key}`: cannot parse `{value}`")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, CmdError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| usage(format!("config key `{key}`: bad item `{s}`"))))
        .collect()
}

impl RunConfig {
    /// Parse a flat `key = value` file; `#` starts a comment, blank lines
    /// are skipped, unknown keys are an error.
    pub fn load(path: &Path) -> Result<Self, CmdError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut pairs = BTreeMap::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    path.display(),
                    line_no + 1
                )));
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        let mut config = RunConfig::default();
        for (key, value) in &pairs {
            config.apply(key, value)?;
        }
        Ok(config)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CmdError> {
        let exp = &mut self.experiment;
        match key {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "tickers" => {
                self.tickers = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "models" => {
                self.models = parse_list::<ModelKind>(key, value)?;
            }
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,

            "lookbacks" => exp.feature.lookbacks = parse_list(key, value)?,
            "alpha" => exp.feature.alpha = parse(key, value)?,
            "rsi_window" => exp.feature.rsi_window = parse(key, value)?,
            "macd_fast" => exp.feature.macd_spans.0 = parse(key, value)?,
            "macd_slow" => exp.feature.macd_spans.1 = parse(key, value)?,
            "macd_signal" => exp.feature.macd_spans.2 = parse(key, value)?,
            "winsor_lo" => {
                let lo: f64 = parse(key, value)?;
                let hi = exp.feature.winsor_quantiles.map(|q| q.1).unwrap_or(0.99);
                exp.feature.winsor_quantiles = Some((lo, hi));
            }
            "winsor_hi" => {
                let hi: f64 = parse(key, value)?;
                let lo = exp.feature.winsor_quantiles.map(|q| q.0).unwrap_or(0.01);
                exp.feature.winsor_quantiles = Some((lo, hi));
            }
            "winsorize" => {
                let on: bool = parse(key, value)?;
                if !on {
                    exp.feature.winsor_quantiles = None;
                }
            }

            "window" => exp.dataset.window = parse(key, value)?,
            "signal_lookback" => exp.dataset.signal_lookback = parse(key, value)?,
            "target" => {
                exp.dataset.target_mode = match value {
                    "signal_diff" => TargetMode::SignalDiff,
                    "return" => TargetMode::Return,
                    other => return Err(usage(format!("target must be signal_diff|return, got `{other}`"))),
                }
            }

            "cost_bps" => exp.cost_bps = parse(key, value)?,
            "position_mode" => {
                exp.position_mode = match value {
                    "anticipated_trend" => PositionMode::AnticipatedTrend,
                    "tanh_forecast" => PositionMode::TanhForecast,
                    other => {
                        return Err(usage(format!(
                            "position_mode must be anticipated_trend|tanh_forecast, got `{other}`"
                        )))
                    }
                }
            }

            "loss" => {
                exp.train.loss = match value {
                    "mse" => LossKind::Mse,
                    "sharpe" => LossKind::Sharpe,
                    other => return Err(usage(format!("loss must be mse|sharpe, got `{other}`"))),
                }
            }
            "gamma" => exp.train.gamma = parse(key, value)?,
            "learning_rate" => exp.train.learning_rate = parse(key, value)?,
            "batch_size" => exp.train.batch_size = parse(key, value)?,
            "epochs" => exp.train.max_epochs = parse(key, value)?,
            "patience" => exp.train.patience = parse(key, value)?,
            "lr_factor" => exp.train.lr_factor = parse(key, value)?,
            "lr_patience" => exp.train.lr_patience = parse(key, value)?,
            "units" => exp.train.hidden = parse(key, value)?,
            "dropout" => exp.train.dropout = parse(key, value)?,
            "shuffle" => exp.train.shuffle = parse(key, value)?,
            "early_stopping" => exp.train.early_stopping = parse(key, value)?,

            "grid_budget" => self.grid_budget = Some(parse(key, value)?),
            "grid_epochs" => self.grid.epochs = parse_list(key, value)?,
            "grid_batch" => self.grid.batch = parse_list(key, value)?,
            "grid_lookback" => self.grid.lookback = parse_list(key, value)?,
            "grid_units" => self.grid.units = parse_list(key, value)?,
            "grid_dropout" => self.grid.dropout = parse_list(key, value)?,
            "grid_gamma" => self.grid.gamma = parse_list(key, value)?,

            "theorem_n" => self.theorem.n = parse(key, value)?,
            "theorem_rho" => self.theorem.rho = parse(key, value)?,
            "theorem_sigma" => self.theorem.sigma = parse(key, value)?,
            "theorem_reps" => self.theorem.repetitions = parse(key, value)?,
            "theorem_seeds" => self.theorem.seeds_per_rep = parse(key, value)?,
            "theorem_learner" => self.theorem.learner = parse(key, value)?,
            "theorem_amplitude" => self.theorem.amplitude = parse(key, value)?,
            "theorem_period" => self.theorem.period = parse(key, value)?,
            "theorem_sweep_l" => self.theorem.sweep_l = parse_list(key, value)?,
            "theorem_sweep_n" => self.theorem.sweep_n = parse(key, value)?,
            "theorem_sweep_seeds" => self.theorem.sweep_seeds = parse(key, value)?,

            other => return Err(usage(format!("unknown config key `{other}`"))),
        }
        // keep the experiment's own seed in lockstep with the master seed
        self.experiment.seed = self.seed;
        self.experiment.train.seed = self.seed;
        Ok(())
    }
}
