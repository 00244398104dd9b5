//! ADF and KPSS stationarity tests with fixed, deterministic recipes.
//!
//! ADF: constant, no trend, lag order p = floor(12 * (n/100)^0.25), reject
//! at 5% when the t-ratio on the lagged level is below -2.86.
//! KPSS: level-stationarity variant with a Bartlett-kernel long-run
//! variance at bandwidth floor(4 * (n/100)^0.25), reject at 5% when the
//! statistic exceeds 0.463.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

const ADF_CRIT_5PCT: f64 = -2.86;
const KPSS_CRIT_5PCT: f64 = 0.463;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdfResult {
    pub stat: f64,
    pub reject_5pct: bool,
    pub lags_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpssResult {
    pub stat: f64,
    pub reject_5pct: bool,
    pub bandwidth: usize,
}

/// Combined report row for one series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationarityResult {
    pub adf_stat: f64,
    pub adf_reject_5pct: bool,
    pub kpss_stat: f64,
    pub kpss_reject_5pct: bool,
    pub lags_used: usize,
}

/// Augmented Dickey-Fuller regression
/// dy_t = a + g*y_{t-1} + sum_i d_i dy_{t-i} + e_t, t-ratio on g.
pub fn adf_test(values: &[f64]) -> Result<AdfResult> {
    let n = values.len();
    if n < 50 {
        return Err(Error::TooShort { needed: 50, got: n });
    }
    let p = (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;

    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let rows = dy.len() - p;
    let cols = 2 + p;
    if rows <= cols {
        return Err(Error::TooShort { needed: cols + p + 2, got: n });
    }

    let mut x = Array2::<f64>::zeros((rows, cols));
    let mut y = Array1::<f64>::zeros(rows);
    for r in 0..rows {
        let t = p + r; // index into dy; dy[t] is the regressand
        y[r] = dy[t];
        x[[r, 0]] = 1.0;
        x[[r, 1]] = values[t]; // y_{t-1} in level indexing
        for i in 1..=p {
            x[[r, 1 + i]] = dy[t - i];
        }
    }

    let ls = linalg::least_squares(&x, &y)?;
    if ls.rank_deficient {
        return Err(Error::SingularRegression);
    }
    let fitted = x.dot(&ls.beta);
    let rss: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let sigma2 = rss / (rows - cols) as f64;

    // SE of the lagged-level coefficient from (X^T X)^{-1}[1,1].
    let xtx = x.t().dot(&x);
    let mut e1 = Array1::<f64>::zeros(cols);
    e1[1] = 1.0;
    let col = linalg::solve_spd(&xtx, &e1)?;
    let se = (sigma2 * col[1]).sqrt();
    if !se.is_finite() || se == 0.0 {
        return Err(Error::SingularRegression);
    }

    let stat = ls.beta[1] / se;
    Ok(AdfResult { stat, reject_5pct: stat < ADF_CRIT_5PCT, lags_used: p })
}

/// KPSS level-stationarity statistic with Bartlett long-run variance.
pub fn kpss_test(values: &[f64]) -> Result<KpssResult> {
    let n = values.len();
    if n < 50 {
        return Err(Error::TooShort { needed: 50, got: n });
    }
    let bw = (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize;

    let mean = values.iter().sum::<f64>() / n as f64;
    let resid: Vec<f64> = values.iter().map(|v| v - mean).collect();

    let mut cum = 0.0;
    let mut s_sq_sum = 0.0;
    for &e in &resid {
        cum += e;
        s_sq_sum += cum * cum;
    }
    let eta = s_sq_sum / (n as f64 * n as f64);

    let mut lrv = resid.iter().map(|e| e * e).sum::<f64>() / n as f64;
    for j in 1..=bw {
        let w = 1.0 - j as f64 / (bw as f64 + 1.0);
        let gamma: f64 = (j..n).map(|t| resid[t] * resid[t - j]).sum::<f64>() / n as f64;
        lrv += 2.0 * w * gamma;
    }

    let stat = if lrv > 0.0 { eta / lrv } else { 0.0 };
    Ok(KpssResult { stat, reject_5pct: stat > KPSS_CRIT_5PCT, bandwidth: bw })
}

/// Run both tests on the same series.
pub fn stationarity_result(values: &[f64]) -> Result<StationarityResult> {
    let adf = adf_test(values)?;
    let kpss = kpss_test(values)?;
    Ok(StationarityResult {
        adf_stat: adf.stat,
        adf_reject_5pct: adf.reject_5pct,
        kpss_stat: kpss.stat,
        kpss_reject_5pct: kpss.reject_5pct,
        lags_used: adf.lags_used,
    })
}
