//! Research toolkit for cost-adjusted trend following and next-day
//! trend-difference forecasting.
//!
//! The pipeline runs from raw OHLCV files to cross-sectional model
//! comparison tables:
//!
//! - [`market_data`]: ingestion, cleaning, summary statistics, ADF/KPSS tests
//! - [`features`]: rolling SMA/volatility, t-stat trend transform, RSI, MACD
//! - [`strategy`]: baseline trend signal, positions, cost-adjusted P&L
//! - [`dataset`]: rolling standardization, windowing, chronological splits
//! - [`linear_models`]: from-scratch OLS / Ridge / Lasso benchmarks
//! - [`gbt`]: minimal gradient-boosted regression trees
//! - [`lstm`]: two-layer LSTM with BPTT, Adam, MSE and Sharpe-ratio losses
//! - [`backtest`]: per-ticker experiments, grids, cross-sectional reports
//! - [`theorem_lab`]: synthetic bias/variance experiments for differenced
//!   targets

pub mod backtest;
pub mod dataset;
pub mod error;
pub mod features;
pub mod gbt;
pub mod linalg;
pub mod linear_models;
pub mod lstm;
pub mod market_data;
pub mod strategy;
pub mod theorem_lab;
pub mod util;

pub use error::{Error, Result};
