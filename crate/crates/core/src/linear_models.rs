//! From-scratch OLS, Ridge, and Lasso regression benchmarks.
//!
//! OLS goes through a Householder QR of the intercept-augmented design;
//! Ridge centers features and target so the intercept stays unpenalized
//! and solves the regularized normal equations; Lasso runs cyclic
//! coordinate descent on unit-norm columns with per-column thresholds so
//! the solution minimizes 0.5*||y - Xb||^2 + lambda*||b||_1 in the
//! original feature scale.

use crate::error::{Error, Result};
use crate::linalg;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearFamily {
    Ols,
    Ridge,
    Lasso,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearFit {
    pub family: LinearFamily,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
    /// Coordinate-descent sweeps for Lasso; 0 for the closed-form fits.
    pub iterations_used: usize,
    /// OLS only: the design was rank deficient and the minimum-norm
    /// solution was returned.
    pub rank_deficient: bool,
    /// Lasso only: hit max_iter before the tolerance was met.
    pub converged: bool,
}

fn check_shapes(x: &Array2<f64>, y: &Array1<f64>) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Ordinary least squares with an internally augmented intercept column.
pub fn fit_ols(x: &Array2<f64>, y: &Array1<f64>) -> Result<LinearFit> {
    check_shapes(x, y)?;
    let (n, m) = x.dim();
    if n <= m {
        return Err(Error::TooFewSamples { needed: m + 1, got: n });
    }
    let mut design = Array2::ones((n, m + 1));
    design.slice_mut(ndarray::s![.., 1..]).assign(x);
    let ls = linalg::least_squares(&design, y)?;
    Ok(LinearFit {
        family: LinearFamily::Ols,
        coefficients: ls.beta.iter().skip(1).copied().collect(),
        intercept: ls.beta[0],
        lambda: 0.0,
        iterations_used: 0,
        rank_deficient: ls.rank_deficient,
        converged: true,
    })
}

fn center(x: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>, f64) {
    let n = x.nrows() as f64;
    let x_mean: Array1<f64> = x.sum_axis(ndarray::Axis(0)) / n;
    let y_mean = y.sum() / n;
    let mut xc = x.clone();
    for mut row in xc.rows_mut() {
        row -= &x_mean;
    }
    let yc = y.mapv(|v| v - y_mean);
    (xc, yc, x_mean, y_mean)
}

/// Ridge regression with an unpenalized intercept: features and target are
/// centered, then b = (Xc^T Xc + lambda I)^-1 Xc^T yc.
pub fn fit_ridge(x: &Array2<f64>, y: &Array1<f64>, lambda: f64) -> Result<LinearFit> {
    check_shapes(x, y)?;
    if x.nrows() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: x.nrows() });
    }
    if lambda < 0.0 {
        return Err(Error::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
    }
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let m = x.ncols();
    let mut a = xc.t().dot(&xc);
    for j in 0..m {
        a[[j, j]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let beta = linalg::solve_spd(&a, &rhs)?;
    let intercept = y_mean - beta.dot(&x_mean);
    Ok(LinearFit {
        family: LinearFamily::Ridge,
        coefficients: beta.to_vec(),
        intercept,
        lambda,
        iterations_used: 0,
        rank_deficient: false,
        converged: true,
    })
}

fn soft_threshold(value: f64, threshold: f64) -> f64 {
    if value > threshold {
        value - threshold
    } else if value < -threshold {
        value + threshold
    } else {
        0.0
    }
}

/// Lasso via cyclic coordinate descent. Columns are centered and scaled to
/// unit L2 norm internally; thresholds scale as lambda/norm_j so the
/// objective being minimized is the one on the original features, and
/// coefficients are mapped back before returning. Soft-thresholding zeroes
/// coefficients exactly.
pub fn fit_lasso(
    x: &Array2<f64>,
    y: &Array1<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<LinearFit> {
    check_shapes(x, y)?;
    if lambda < 0.0 || tol <= 0.0 {
        return Err(Error::InvalidConfig("lambda must be >= 0 and tol > 0".into()));
    }
    let (xc, yc, x_mean, y_mean) = center(x, y);
    let (n, m) = xc.dim();

    let mut norms = vec![0.0_f64; m];
    let mut xs = xc.clone();
    for j in 0..m {
        let norm = xc.column(j).mapv(|v| v * v).sum().sqrt();
        norms[j] = norm;
        if norm > 0.0 {
            for i in 0..n {
                xs[[i, j]] /= norm;
            }
        }
    }

    let mut beta = vec![0.0_f64; m]; // in scaled coordinates
    let mut residual = yc.clone();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..m {
            if norms[j] == 0.0 {
                continue; // constant column carries no signal after centering
            }
            let col = xs.column(j);
            let rho = col.dot(&residual) + beta[j]; // unit-norm column
            let new_beta = soft_threshold(rho, lambda / norms[j]);
            let delta = new_beta - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    residual[i] -= delta * col[i];
                }
                beta[j] = new_beta;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }

    let coefficients: Vec<f64> = beta
        .iter()
        .zip(&norms)
        .map(|(&b, &s)| if s > 0.0 { b / s } else { 0.0 })
        .collect();
    let intercept = y_mean
        - coefficients.iter().zip(x_mean.iter()).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearFit {
        family: LinearFamily::Lasso,
        coefficients,
        intercept,
        lambda,
        iterations_used: sweeps,
        rank_deficient: false,
        converged,
    })
}

pub const LASSO_DEFAULT_TOL: f64 = 1e-8;
pub const LASSO_DEFAULT_MAX_ITER: usize = 10_000;

/// X b + intercept.
pub fn predict(fit: &LinearFit, x: &Array2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != fit.coefficients.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} columns", fit.coefficients.len()),
            got: format!("{} columns", x.ncols()),
        });
    }
    let beta = Array1::from(fit.coefficients.clone());
    Ok(x.dot(&beta).iter().map(|v| v + fit.intercept).collect())
}
