//! Synthetic lab for the differencing bias/variance claims: trend plus
//! AR(1) noise generators, input-variance comparisons, and across-seed
//! estimator variance/bias experiments on level vs difference targets.
//!
//! `sigma` is the MARGINAL standard deviation of the AR(1) noise (so
//! Var(delta eps) = 2 sigma^2 (1 - rho) exactly); innovations are scaled
//! by sqrt(1 - rho^2) internally and the process starts stationary.

use crate::dataset::{chrono_split, Sample, SampleSet, ScalingState};
use crate::error::{Error, Result};
use crate::linear_models::{fit_ridge, predict as linear_predict};
use crate::lstm::{self, TrainConfig};
use crate::util;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    Sinusoid { amplitude: f64, period: f64 },
    PiecewiseLinear { slopes: Vec<f64>, segment_len: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub trend: TrendKind,
    pub rho: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn sinusoid(n: usize, amplitude: f64, period: f64, rho: f64, sigma: f64, seed: u64) -> Self {
        Self { n, trend: TrendKind::Sinusoid { amplitude, period }, rho, sigma, seed }
    }

    pub fn flat(n: usize, rho: f64, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            trend: TrendKind::PiecewiseLinear { slopes: vec![0.0], segment_len: n },
            rho,
            sigma,
            seed,
        }
    }

    /// Sinusoid whose maximum one-step trend increment is `slope_bound`.
    pub fn sinusoid_with_slope(
        n: usize,
        slope_bound: f64,
        period: f64,
        rho: f64,
        sigma: f64,
        seed: u64,
    ) -> Self {
        let amplitude = slope_bound * period / (2.0 * std::f64::consts::PI);
        Self::sinusoid(n, amplitude, period, rho, sigma, seed)
    }

    /// Upper bound on |m_t - m_{t-1}| implied by the trend family.
    pub fn slope_bound(&self) -> f64 {
        match &self.trend {
            TrendKind::Sinusoid { amplitude, period } => {
                amplitude * 2.0 * std::f64::consts::PI / period
            }
            TrendKind::PiecewiseLinear { slopes, .. } => {
                slopes.iter().fold(0.0_f64, |acc, s| acc.max(s.abs()))
            }
        }
    }

    fn trend_values(&self) -> Vec<f64> {
        match &self.trend {
            TrendKind::Sinusoid { amplitude, period } => (0..self.n)
                .map(|t| amplitude * (2.0 * std::f64::consts::PI * t as f64 / period).sin())
                .collect(),
            TrendKind::PiecewiseLinear { slopes, segment_len } => {
                let seg_len = (*segment_len).max(1);
                let mut m = Vec::with_capacity(self.n);
                let mut level = 0.0;
                for t in 0..self.n {
                    m.push(level);
                    level += slopes[(t / seg_len).min(slopes.len() - 1)];
                }
                m
            }
        }
    }
}

/// y = m + eps with stationary AR(1) eps. Returns (y, m, eps) so oracles
/// can see the decomposition. The generated trend is verified against the
/// declared slope bound.
pub fn generate(spec: &SyntheticSpec) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if spec.n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(-1.0..1.0).contains(&spec.rho) {
        return Err(Error::InvalidConfig(format!("rho must be in (-1,1), got {}", spec.rho)));
    }
    if spec.sigma < 0.0 {
        return Err(Error::InvalidConfig("sigma must be >= 0".into()));
    }
    let m = spec.trend_values();
    let bound = spec.slope_bound();
    for w in m.windows(2) {
        let inc = (w[1] - w[0]).abs();
        if inc > bound * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::InvalidConfig(format!(
                "trend increment {inc} exceeds declared slope bound {bound}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let innovation_std = spec.sigma * (1.0 - spec.rho * spec.rho).sqrt();
    let mut eps = Vec::with_capacity(spec.n);
    let first: f64 = rng.sample::<f64, _>(StandardNormal) * spec.sigma;
    eps.push(first);
    for _ in 1..spec.n {
        let u: f64 = rng.sample::<f64, _>(StandardNormal) * innovation_std;
        let prev = *eps.last().unwrap();
        eps.push(spec.rho * prev + u);
    }
    let y: Vec<f64> = m.iter().zip(&eps).map(|(a, b)| a + b).collect();
    Ok((y, m, eps))
}

/// Sample variances of the level series and its first difference.
pub fn variance_comparison(spec: &SyntheticSpec) -> Result<(f64, f64)> {
    let (y, _, _) = generate(spec)?;
    let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
    Ok((util::variance(&y), util::variance(&dy)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    RidgeOnLags,
    SmallLstm,
}

impl std::str::FromStr for Learner {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge" | "ridge_on_lags" => Ok(Learner::RidgeOnLags),
            "lstm" | "small_lstm" => Ok(Learner::SmallLstm),
            other => Err(Error::InvalidConfig(format!("unknown learner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasVarReport {
    pub var_y: f64,
    pub var_delta: f64,
    pub estimator_var_y: f64,
    pub estimator_var_delta: f64,
    pub bias_y: f64,
    pub bias_delta: f64,
    pub n_seeds: usize,
}

const LAG_COUNT: usize = 5;
const RIDGE_LAMBDA: f64 = 1e-3;
const HOLDOUT_FRACTION: f64 = 0.2;

/// Windows of LAG_COUNT observed values ending at t, paired with the true
/// target at t. Row i covers t = LAG_COUNT-1+i; X[[i, j]] = observed[t-j].
fn lag_matrix(observed: &[f64], targets: &[f64]) -> (Array2<f64>, Array1<f64>) {
    debug_assert_eq!(observed.len(), targets.len());
    let n = observed.len() - (LAG_COUNT - 1);
    let x = Array2::from_shape_fn((n, LAG_COUNT), |(i, j)| observed[LAG_COUNT - 1 + i - j]);
    let y = Array1::from_shape_fn(n, |i| targets[LAG_COUNT - 1 + i]);
    (x, y)
}

/// Train on the first 1-HOLDOUT fraction against the TRUE trend targets
/// (the theorem's f is trained to predict m_t / delta_t), predict the rest.
fn fit_predict_holdout(
    learner: Learner,
    observed: &[f64],
    targets: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let (x, y) = lag_matrix(observed, targets);
    let n = y.len();
    let split = ((1.0 - HOLDOUT_FRACTION) * n as f64).floor() as usize;
    match learner {
        Learner::RidgeOnLags => {
            let x_train = x.slice(ndarray::s![..split, ..]).to_owned();
            let y_train = y.slice(ndarray::s![..split]).to_owned();
            let fit = fit_ridge(&x_train, &y_train, RIDGE_LAMBDA)?;
            let x_ho = x.slice(ndarray::s![split.., ..]).to_owned();
            linear_predict(&fit, &x_ho)
        }
        Learner::SmallLstm => {
            let set = lag_sample_set(&x, &y, split)?;
            let config = TrainConfig {
                hidden: 4,
                batch_size: 64,
                max_epochs: 15,
                dropout: 0.0,
                patience: 5,
                seed,
                ..TrainConfig::default()
            };
            let (params, _) = lstm::train(&set, &config)?;
            let test_idx: Vec<usize> = (split..n).collect();
            let mut batch = ndarray::Array3::zeros((test_idx.len(), LAG_COUNT, 1));
            for (row, &i) in test_idx.iter().enumerate() {
                for t in 0..LAG_COUNT {
                    batch[[row, t, 0]] = x[[i, LAG_COUNT - 1 - t]];
                }
            }
            Ok(lstm::predict(&params, &batch)?.to_vec())
        }
    }
}

/// Wrap the lag matrix as a SampleSet so the LSTM trainer can consume it
/// (train = pre-split rows minus a small validation tail).
fn lag_sample_set(x: &Array2<f64>, y: &Array1<f64>, split: usize) -> Result<SampleSet> {
    use chrono::NaiveDate;
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let n = y.len();
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        // window rows oldest-first: x[i] holds (y_{t-1}..y_{t-k})
        let window = Array2::from_shape_fn((LAG_COUNT, 1), |(t, _)| x[[i, LAG_COUNT - 1 - t]]);
        samples.push(Sample {
            window,
            target: y[i],
            date: start + chrono::Duration::days(i as i64),
            base_signal: 0.0,
            next_return: 0.0,
        });
    }
    let dates: Vec<_> = samples.iter().map(|s| s.date).collect();
    // chronological: train on most of the pre-split block, validate on its
    // tail, leave the holdout as the test block
    let val_start = split.saturating_sub(split / 5);
    let mut splits = chrono_split(&dates, (0.5, 0.25, 0.25))?;
    for (i, label) in splits.iter_mut().enumerate() {
        *label = if i < val_start {
            crate::dataset::SplitLabel::Train
        } else if i < split {
            crate::dataset::SplitLabel::Validation
        } else {
            crate::dataset::SplitLabel::Test
        };
    }
    Ok(SampleSet {
        ticker: "synthetic".into(),
        samples,
        splits,
        scaling_state: ScalingState {
            feature_names: vec!["lag".into()],
            window: LAG_COUNT,
            means: vec![],
            stds: vec![],
        },
    })
}

/// Across-seed estimator variance and bias for the level task (predict
/// y_t, scored against the true trend m_t) and the difference task
/// (predict delta y_t, scored against delta m_t). The trend is fixed;
/// only the noise is redrawn per seed.
pub fn estimator_experiment(
    spec: &SyntheticSpec,
    learner: Learner,
    n_seeds: usize,
) -> Result<BiasVarReport> {
    if n_seeds < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n_seeds });
    }
    let mut level_preds: Vec<Vec<f64>> = Vec::with_capacity(n_seeds);
    let mut diff_preds: Vec<Vec<f64>> = Vec::with_capacity(n_seeds);
    let mut truth_m: Vec<f64> = Vec::new();
    let mut truth_delta: Vec<f64> = Vec::new();
    let mut var_y_acc = 0.0;
    let mut var_d_acc = 0.0;

    for s in 0..n_seeds {
        let seed = util::derive_seed(spec.seed, &format!("noise/{s}"));
        let mut redraw = spec.clone();
        redraw.seed = seed;
        let (y, m, _) = generate(&redraw)?;
        let dy: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let dm: Vec<f64> = m.windows(2).map(|w| w[1] - w[0]).collect();
        var_y_acc += util::variance(&y);
        var_d_acc += util::variance(&dy);

        level_preds.push(fit_predict_holdout(learner, &y, &m, seed)?);
        diff_preds.push(fit_predict_holdout(learner, &dy, &dm, seed)?);

        if s == 0 {
            // holdout truth, aligned with fit_predict_holdout's indexing
            let n_level = y.len() - (LAG_COUNT - 1);
            let split = ((1.0 - HOLDOUT_FRACTION) * n_level as f64).floor() as usize;
            truth_m = (split..n_level).map(|i| m[LAG_COUNT - 1 + i]).collect();
            let n_diff = dy.len() - (LAG_COUNT - 1);
            let split_d = ((1.0 - HOLDOUT_FRACTION) * n_diff as f64).floor() as usize;
            truth_delta = (split_d..n_diff).map(|i| dm[LAG_COUNT - 1 + i]).collect();
        }
    }

    let across_seed = |preds: &[Vec<f64>], truth: &[f64]| -> (f64, f64) {
        let n_dates = preds[0].len().min(truth.len());
        let mut var_sum = 0.0;
        let mut bias_sum = 0.0;
        for d in 0..n_dates {
            let col: Vec<f64> = preds.iter().map(|p| p[d]).collect();
            var_sum += util::variance(&col);
            bias_sum += (util::mean(&col) - truth[d]).abs();
        }
        (var_sum / n_dates as f64, bias_sum / n_dates as f64)
    };
    let (estimator_var_y, bias_y) = across_seed(&level_preds, &truth_m);
    let (estimator_var_delta, bias_delta) = across_seed(&diff_preds, &truth_delta);

    Ok(BiasVarReport {
        var_y: var_y_acc / n_seeds as f64,
        var_delta: var_d_acc / n_seeds as f64,
        estimator_var_y,
        estimator_var_delta,
        bias_y,
        bias_delta,
        n_seeds,
    })
}

/// Analytic standard error of the sample Var(delta eps) estimate for
/// AR(1) noise, including the autocorrelation inflation of delta eps.
pub fn var_delta_standard_error(rho: f64, sigma: f64, n: usize) -> f64 {
    let var_delta = 2.0 * sigma * sigma * (1.0 - rho);
    // rho_delta(k) = -rho^(k-1) (1-rho)/2; inflation = 1 + 2 sum rho_k^2
    let r1 = (1.0 - rho) / 2.0;
    let sum_sq = r1 * r1 / (1.0 - rho * rho); // geometric sum of rho^(2(k-1)) * r1^2
    let inflation = 1.0 + 2.0 * sum_sq;
    var_delta * (2.0 * inflation / n as f64).sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProofIdentityCheck {
    pub sample_var_delta: f64,
    pub theory: f64,
    pub standard_error: f64,
    pub holds_3se: bool,
}

/// Flat-trend Monte-Carlo check of Var(delta eps) = 2 sigma^2 (1 - rho).
pub fn check_proof_identity(rho: f64, sigma: f64, n: usize, seed: u64) -> Result<ProofIdentityCheck> {
    let spec = SyntheticSpec::flat(n, rho, sigma, seed);
    let (_, var_delta) = variance_comparison(&spec)?;
    let theory = 2.0 * sigma * sigma * (1.0 - rho);
    let se = var_delta_standard_error(rho, sigma, n);
    Ok(ProofIdentityCheck {
        sample_var_delta: var_delta,
        theory,
        standard_error: se,
        holds_3se: (var_delta - theory).abs() <= 3.0 * se,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorVarianceCheck {
    pub wins: usize,
    pub repetitions: usize,
    pub holds_90pct: bool,
    pub reports: Vec<BiasVarReport>,
}

/// Repeat the estimator experiment with independent master seeds and
/// count how often the difference task shows lower estimator variance.
pub fn check_estimator_variance(
    base: &SyntheticSpec,
    learner: Learner,
    repetitions: usize,
    seeds_per_rep: usize,
) -> Result<EstimatorVarianceCheck> {
    let mut wins = 0;
    let mut reports = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let mut spec = base.clone();
        spec.seed = util::derive_seed(base.seed, &format!("rep/{rep}"));
        let report = estimator_experiment(&spec, learner, seeds_per_rep)?;
        if report.estimator_var_delta < report.estimator_var_y {
            wins += 1;
        }
        reports.push(report);
    }
    Ok(EstimatorVarianceCheck {
        wins,
        repetitions,
        holds_90pct: wins as f64 >= 0.9 * repetitions as f64,
        reports,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasSweepRow {
    pub slope_bound: f64,
    pub bias_gap: f64,
    pub var_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasEnvelopeCheck {
    pub rows: Vec<BiasSweepRow>,
    pub monotone: bool,
    /// Least-squares slope of gap vs L.
    pub fitted_slope: f64,
    pub fitted_intercept: f64,
    /// At-most-linear growth: no interior gap falls below the chord
    /// through the sweep endpoints (superlinear growth would put it there)
    /// beyond 10% of the gap range.
    pub envelope_holds: bool,
}

/// Sweep the local trend slope at FIXED trend amplitude (the period
/// carries the slope: P = 2 pi A / L) and test that the bias gap
/// (difference task minus level task) is monotone and grows at most
/// linearly in L.
pub fn check_bias_envelope(
    l_values: &[f64],
    amplitude: f64,
    n: usize,
    rho: f64,
    sigma: f64,
    seed: u64,
    n_seeds: usize,
) -> Result<BiasEnvelopeCheck> {
    if l_values.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: l_values.len() });
    }
    let mut rows = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let period = 2.0 * std::f64::consts::PI * amplitude / l;
        let spec = SyntheticSpec::sinusoid(n, amplitude, period, rho, sigma, seed);
        let report = estimator_experiment(&spec, Learner::RidgeOnLags, n_seeds)?;
        rows.push(BiasSweepRow {
            slope_bound: l,
            bias_gap: report.bias_delta - report.bias_y,
            var_ratio: report.estimator_var_delta / report.estimator_var_y,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].bias_gap >= w[0].bias_gap - 1e-12);

    // least-squares affine fit of gap on L
    let n_pts = rows.len() as f64;
    let mean_l = rows.iter().map(|r| r.slope_bound).sum::<f64>() / n_pts;
    let mean_g = rows.iter().map(|r| r.bias_gap).sum::<f64>() / n_pts;
    let sxx: f64 = rows.iter().map(|r| (r.slope_bound - mean_l).powi(2)).sum();
    let sxy: f64 =
        rows.iter().map(|r| (r.slope_bound - mean_l) * (r.bias_gap - mean_g)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_g - slope * mean_l;

    let gap_range = rows
        .iter()
        .map(|r| r.bias_gap)
        .fold(f64::NEG_INFINITY, f64::max)
        - rows.iter().map(|r| r.bias_gap).fold(f64::INFINITY, f64::min);
    let slack = 0.10 * gap_range.max(1e-12);
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let chord = |l: f64| {
        first.bias_gap
            + (last.bias_gap - first.bias_gap) * (l - first.slope_bound)
                / (last.slope_bound - first.slope_bound)
    };
    let envelope_holds = rows
        .iter()
        .all(|r| r.bias_gap >= chord(r.slope_bound) - slack);

    Ok(BiasEnvelopeCheck {
        rows,
        monotone,
        fitted_slope: slope,
        fitted_intercept: intercept,
        envelope_holds,
    })
}
