use clap::{Parser, Subcommand};
use deltrend_cli::{commands, config::RunConfig, CmdError};
use std::path::PathBuf;

/// File-driven research toolkit: OHLCV cleaning, technical features, a
/// cost-adjusted trend-following baseline, next-day trend-difference
/// forecasting (LSTM vs linear and boosted-tree benchmarks), walk-forward
/// evaluation, and a synthetic bias/variance lab.
#[derive(Parser)]
#[command(name = "deltrend", version, about)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed; every stochastic job derives its stream from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-ticker jobs.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Input data directory of per-ticker CSVs.
    #[arg(long, global = true)]
    data: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean raw OHLCV files and write the aligned store plus reports.
    Ingest,
    /// Summary statistics of daily returns and trend differences.
    Stats,
    /// Persist engineered feature frames.
    Features,
    /// Baseline trend-following P&L per ticker.
    Backtest,
    /// Train one LSTM per ticker and write checkpoints.
    Train,
    /// Hyperparameter grid search on the validation split.
    Grid {
        /// Evaluate only this many grid points (seeded uniform subsample).
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Full model comparison with report tables and plot data.
    Compare,
    /// One-axis robustness sweep.
    Robustness {
        /// lookback | rsi | macd | early_stopping
        #[arg(long)]
        axis: String,
    },
    /// Synthetic bias/variance property suite.
    Theorem {
        /// Override the AR(1) coefficient.
        #[arg(long)]
        rho: Option<f64>,
        /// Override the synthetic sample length.
        #[arg(long)]
        n: Option<usize>,
        /// ridge | small_lstm
        #[arg(long)]
        learner: Option<String>,
    },
    /// Cross-sectional aggregates from an existing compare output.
    Report,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CmdError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.apply("seed", &seed.to_string())?;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if let Some(data) = &cli.data {
        config.data_dir = data.clone();
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<(), CmdError> {
    let mut config = build_config(cli)?;
    match &cli.command {
        Command::Ingest => commands::ingest::run(&config),
        Command::Stats => commands::stats::run(&config),
        Command::Features => commands::features::run(&config),
        Command::Backtest => commands::backtest::run(&config),
        Command::Train => commands::train::run(&config),
        Command::Grid { budget } => {
            if budget.is_some() {
                config.grid_budget = *budget;
            }
            commands::grid::run(&config)
        }
        Command::Compare => commands::compare::run(&config),
        Command::Robustness { axis } => {
            let axis = axis.parse().map_err(|e: deltrend::Error| CmdError::Usage(e.to_string()))?;
            commands::robustness::run(&config, axis)
        }
        Command::Theorem { rho, n, learner } => {
            if let Some(rho) = rho {
                config.theorem.rho = *rho;
            }
            if let Some(n) = n {
                config.theorem.n = *n;
            }
            if let Some(learner) = learner {
                config.theorem.learner =
                    learner.parse().map_err(|e: deltrend::Error| CmdError::Usage(e.to_string()))?;
            }
            commands::theorem::run(&config)
        }
        Command::Report => commands::report::run(&config),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
