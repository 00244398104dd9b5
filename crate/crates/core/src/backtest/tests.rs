use super::*;
use crate::market_data::tests::series_from_closes;
use crate::strategy::PnlSeries;

fn dates(n: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2022, 1, 3).unwrap();
    (0..n).map(|i| start + chrono::Duration::days(i as i64)).collect()
}

fn pnl_from_daily(daily: Vec<f64>) -> PnlSeries {
    let cumulative: Vec<f64> = daily
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    PnlSeries { dates: dates(daily.len()), daily, cumulative, cost_bps: 2.0 }
}

#[test]
fn metrics_perfect_forecast() {
    let t = vec![0.1, -0.2, 0.3, 0.0];
    let model = pnl_from_daily(vec![0.01, 0.02, -0.01, 0.005]);
    let base = pnl_from_daily(vec![0.0, 0.0, 0.0, 0.0]);
    let m = metrics(&t, &t, &model, &base).unwrap();
    assert_eq!(m.rmse, 0.0);
    assert_eq!(m.directional_accuracy, 1.0);
    assert!(m.sharpe_annualized.is_some());
    assert!((m.pnl_gain - m.cum_pnl).abs() < 1e-15);
}

#[test]
fn metrics_flags_degenerate_sharpe() {
    let p = vec![0.1, 0.2, 0.1];
    let model = pnl_from_daily(vec![0.01, 0.01, 0.01]);
    let base = pnl_from_daily(vec![0.0, 0.0, 0.0]);
    let m = metrics(&p, &p, &model, &base).unwrap();
    assert!(m.sharpe_annualized.is_none());
}

#[test]
fn metrics_match_independent_recomputation() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 120;
    let preds: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let targets: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let daily: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.01).collect();
    let base_daily: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 0.01).collect();
    let model = pnl_from_daily(daily.clone());
    let base = pnl_from_daily(base_daily.clone());
    let m = metrics(&preds, &targets, &model, &base).unwrap();

    // straightforward oracle recomputation
    let mut se = 0.0;
    let mut hits = 0usize;
    for i in 0..n {
        se += (preds[i] - targets[i]).powi(2);
        let ok = if preds[i] == 0.0 {
            targets[i] == 0.0
        } else {
            preds[i].signum() == targets[i].signum() && targets[i] != 0.0
        };
        if ok {
            hits += 1;
        }
    }
    assert!((m.rmse - (se / n as f64).sqrt()).abs() < 1e-12);
    assert!((m.directional_accuracy - hits as f64 / n as f64).abs() < 1e-12);

    let mean = daily.iter().sum::<f64>() / n as f64;
    let var = daily.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n as f64 - 1.0);
    let sharpe = mean / var.sqrt() * 252.0_f64.sqrt();
    assert!((m.sharpe_annualized.unwrap() - sharpe).abs() < 1e-12);

    let cum: f64 = daily.iter().sum();
    let base_cum: f64 = base_daily.iter().sum();
    assert!((m.cum_pnl - cum).abs() < 1e-12);
    assert!((m.pnl_gain - (cum - base_cum)).abs() < 1e-12);
}

#[test]
fn forecast_positions_zero_reduces_to_baseline() {
    let d = dates(4);
    let sig = vec![0.4, -0.7, 1.8, -2.4];
    let pos = positions_from_forecast(&d, &sig, &[0.0; 4], PositionMode::AnticipatedTrend, 2.0)
        .unwrap();
    let expect: Vec<f64> = sig.iter().map(|s| s.clamp(-1.0, 1.0)).collect();
    assert_eq!(pos.weights, expect);
}

#[test]
fn forecast_positions_clamp_and_tanh() {
    let d = dates(2);
    let pos = positions_from_forecast(
        &d,
        &[0.1, 0.1],
        &[10.0, -10.0],
        PositionMode::AnticipatedTrend,
        2.0,
    )
    .unwrap();
    assert_eq!(pos.weights, vec![1.0, -1.0]);

    let pos =
        positions_from_forecast(&d, &[0.0, 0.0], &[0.1, 0.1], PositionMode::TanhForecast, 2.0)
            .unwrap();
    assert!((pos.weights[0] - 0.2_f64.tanh()).abs() < 1e-12);
    assert!((0.2_f64.tanh() - 0.19738).abs() < 1e-5);
}

#[test]
fn grid_selection_and_order_invariance() {
    let grid = GridSpec {
        epochs: vec![50, 100],
        batch: vec![32],
        lookback: vec![50],
        units: vec![16, 32],
        dropout: vec![0.1],
        gamma: vec![1.0],
    };
    // deterministic synthetic objective
    let eval = |p: &GridPoint| -> crate::error::Result<f64> {
        Ok((p.epochs as f64 - 100.0).abs() * 0.01 + (p.units as f64 - 32.0).abs() * 0.001)
    };
    let full = grid_search_with(&grid, None, 0, eval).unwrap();
    assert_eq!(full.best, GridPoint {
        epochs: 100,
        batch: 32,
        lookback: 50,
        units: 32,
        dropout: 0.1,
        gamma: 1.0
    });
    assert_eq!(full.leaderboard.len(), 4);

    // order invariance: evaluating a reversed copy yields the same best
    let reversed = GridSpec { epochs: vec![100, 50], units: vec![32, 16], ..grid.clone() };
    let r = grid_search_with(&reversed, None, 0, eval).unwrap();
    assert_eq!(r.best, full.best);

    // budget = 1 returns that single config
    let one = grid_search_with(&grid, Some(1), 7, eval).unwrap();
    assert_eq!(one.leaderboard.len(), 1);
    assert_eq!(one.best, one.leaderboard[0].0);

    // the published selected point is a member of the default full grid
    let selected = GridPoint {
        epochs: 100,
        batch: 64,
        lookback: 100,
        units: 64,
        dropout: 0.2,
        gamma: 2.0,
    };
    assert!(GridSpec::default().contains(&selected));
    assert_eq!(GridSpec::default().points().len(), 729);
}

fn trending_series(n: usize) -> crate::market_data::OhlcvSeries {
    let closes: Vec<f64> = (0..n)
        .map(|i| {
            100.0 + 25.0 * (i as f64 * 0.021).sin() + 10.0 * (i as f64 * 0.143).cos()
                + i as f64 * 0.015
        })
        .collect();
    series_from_closes("TRND", &closes)
}

fn fast_config() -> ExperimentConfig {
    ExperimentConfig {
        feature: FeatureConfig {
            lookbacks: vec![20],
            winsor_quantiles: Some((0.01, 0.99)),
            ..FeatureConfig::default()
        },
        dataset: DatasetConfig { window: 10, signal_lookback: 20, ..DatasetConfig::default() },
        train: TrainConfig {
            hidden: 4,
            batch_size: 32,
            max_epochs: 3,
            dropout: 0.1,
            seed: 5,
            ..TrainConfig::default()
        },
        gbt: GbtParams { n_trees: 10, min_leaf: 10, ..GbtParams::default() },
        cost_bps: 2.0,
        position_mode: PositionMode::AnticipatedTrend,
        seed: 5,
    }
}

#[test]
fn run_ticker_baseline_only_has_empty_models() {
    let series = trending_series(420);
    let run = run_ticker(&series, &[], &fast_config()).unwrap();
    assert!(run.models.is_empty());
    assert!(!run.baseline.dates.is_empty());
    let row = ComparisonRow::from_run(&run);
    assert!(row.model_cum_pnl.is_empty());
}

#[test]
fn run_ticker_is_deterministic_and_isolates_failures() {
    let series = trending_series(420);
    let config = fast_config();
    let models = [ModelKind::Lstm, ModelKind::Ridge, ModelKind::Ols, ModelKind::Gbt];
    let a = run_ticker(&series, &models, &config).unwrap();
    let b = run_ticker(&series, &models, &config).unwrap();
    for ((ka, oa), (kb, ob)) in a.models.iter().zip(b.models.iter()) {
        assert_eq!(ka, kb);
        match (oa, ob) {
            (Ok(x), Ok(y)) => {
                assert_eq!(x.metrics.rmse.to_bits(), y.metrics.rmse.to_bits());
                assert_eq!(x.metrics.cum_pnl.to_bits(), y.metrics.cum_pnl.to_bits());
            }
            (Err(x), Err(y)) => assert_eq!(x, y),
            _ => panic!("determinism broken for {ka:?}"),
        }
    }
    for (_, outcome) in &a.models {
        let o = outcome.as_ref().expect("all models should fit this fixture");
        assert!((o.metrics.pnl_gain - (o.metrics.cum_pnl - a.baseline.final_cum_pnl())).abs()
            < 1e-12);
    }
}

#[test]
fn cross_section_aggregates() {
    let mk_row = |ticker: &str, base: f64, lstm_pnl: f64| -> ComparisonRow {
        let mut model_cum_pnl = BTreeMap::new();
        let mut pnl_gain = BTreeMap::new();
        model_cum_pnl.insert(ModelKind::Lstm, lstm_pnl);
        pnl_gain.insert(ModelKind::Lstm, lstm_pnl - base);
        ComparisonRow { ticker: ticker.into(), baseline_cum_pnl: base, model_cum_pnl, pnl_gain }
    };

    // single row: totals and percentiles equal the row
    let single = cross_section(&[mk_row("A", 0.5, 0.9)]).unwrap();
    let agg = &single.models[&ModelKind::Lstm];
    assert!((single.baseline_total - 0.5).abs() < 1e-15);
    assert!((agg.total_gain - 0.4).abs() < 1e-15);
    assert!((agg.gain_median - 0.4).abs() < 1e-15);
    assert!((agg.gain_p25 - 0.4).abs() < 1e-15);

    // +1 / -1 gains: total zero, win rate one half
    let rows = vec![mk_row("A", 0.0, 1.0), mk_row("B", 0.0, -1.0)];
    let cs = cross_section(&rows).unwrap();
    let agg = &cs.models[&ModelKind::Lstm];
    assert_eq!(agg.total_gain, 0.0);
    assert_eq!(agg.win_count, 1);
    assert!((agg.win_rate - 0.5).abs() < 1e-15);

    assert!(cross_section(&[]).is_err());
}

#[test]
fn sweep_base_row_has_zero_deltas() {
    let series = trending_series(680);
    let mut config = fast_config();
    config.feature.lookbacks = vec![100];
    let report =
        robustness_sweep(SweepAxis::Lookback, &series, &[ModelKind::Ridge], &config).unwrap();
    assert_eq!(report.rows.len(), 5);
    let base_row = report.rows.iter().find(|r| r.is_base).expect("lookback 100 is in the axis");
    assert_eq!(base_row.label, "lookback_100");
    assert_eq!(base_row.delta_rmse[&ModelKind::Ridge], 0.0);
    assert_eq!(base_row.delta_gain[&ModelKind::Ridge], 0.0);
}

#[test]
fn sweep_rsi_axis_runs_all_rows() {
    let series = trending_series(420);
    let config = fast_config();
    let report = robustness_sweep(SweepAxis::Rsi, &series, &[ModelKind::Ols], &config).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        assert!(row.metrics.contains_key(&ModelKind::Ols));
    }
}

#[test]
fn subperiod_partition_sums_to_whole() {
    let series = trending_series(420);
    let config = fast_config();
    let run = run_ticker(&series, &[ModelKind::Ridge], &config).unwrap();
    let model = &run.models[0].1.as_ref().unwrap().report;
    let baseline = &run.baseline;

    let all = (model.dates[0], *model.dates.last().unwrap());
    let whole = subperiod_analysis(model, baseline, &[all]).unwrap();
    assert_eq!(whole.len(), 1);
    assert!((whole[0].metrics.cum_pnl - model.final_cum_pnl()).abs() < 1e-12);

    let mid = model.dates[model.dates.len() / 2];
    let parts = subperiod_analysis(
        model,
        baseline,
        &[(all.0, mid), (mid + chrono::Duration::days(1), all.1)],
    )
    .unwrap();
    let total: f64 = parts.iter().map(|p| p.metrics.cum_pnl).sum();
    assert!((total - model.final_cum_pnl()).abs() < 1e-10);
    assert_eq!(parts[0].start, all.0);
    assert_eq!(parts[1].end, all.1);

    // empty slice errors
    let far = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
    assert!(matches!(
        subperiod_analysis(model, baseline, &[(far, far)]),
        Err(Error::EmptySlice)
    ));
}
